use std::collections::BTreeMap;

use super::hungarian::max_weight_assignment;
use crate::error::{arg_err, dim_err, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusteringScores {
    pub acc: f64,
    pub nmi: f64,
    pub pur: f64,
}

/// Maps arbitrary labels to `0..k` in order of first value.
fn compress(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

/// `counts[p][t]` = samples predicted `p` with truth `t`.
fn contingency(pred: &[usize], truth: &[usize]) -> Vec<Vec<f64>> {
    let (p, kp) = compress(pred);
    let (t, kt) = compress(truth);
    let mut counts = vec![vec![0.0; kt]; kp];
    for (&a, &b) in p.iter().zip(&t) {
        counts[a][b] += 1.0;
    }
    counts
}

fn matched(counts: &[Vec<f64>]) -> f64 {
    max_weight_assignment(counts)
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| counts[i][j]))
        .sum()
}

fn purity_hits(counts: &[Vec<f64>]) -> f64 {
    counts
        .iter()
        .map(|row| row.iter().cloned().fold(0.0, f64::max))
        .sum()
}

fn entropy(marginal: &[f64], n: f64) -> f64 {
    marginal
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * (c / n).ln())
        .sum()
}

/// Mutual information over the geometric mean of the two entropies. Two
/// single-cluster partitions count as identical (1); a single-cluster
/// partition against a non-trivial one carries no information (0).
fn nmi(counts: &[Vec<f64>]) -> f64 {
    let n: f64 = counts.iter().flat_map(|r| r.iter()).sum();
    let rows: Vec<f64> = counts.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..counts[0].len())
        .map(|j| counts.iter().map(|r| r[j]).sum())
        .collect();
    let (hp, ht) = (entropy(&rows, n), entropy(&cols, n));
    if hp == 0.0 && ht == 0.0 {
        return 1.0;
    }
    if hp == 0.0 || ht == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                mi += (c / n) * ((c * n) / (rows[i] * cols[j])).ln();
            }
        }
    }
    (mi / (hp * ht).sqrt()).clamp(0.0, 1.0)
}

/// ACC under the best one-to-one label matching, NMI and purity.
pub fn eval_clustering(pred: &[usize], truth: &[usize]) -> Result<ClusteringScores> {
    if pred.len() != truth.len() {
        return Err(dim_err(format!(
            "{} predictions for {} truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(arg_err("cannot score an empty clustering"));
    }
    let counts = contingency(pred, truth);
    let n = pred.len() as f64;
    Ok(ClusteringScores {
        acc: matched(&counts) / n,
        nmi: nmi(&counts),
        pur: purity_hits(&counts) / n,
    })
}

/// Scores a clustering of the detected inliers against the true inliers.
///
/// `kept[i]` is the sample that received `pred[i]`. True inliers that were
/// removed as outliers count as misclassified in ACC and purity and are left
/// out of NMI; true outliers that slipped through have no reference label and
/// are ignored.
pub fn score_detected_clustering(
    kept: &[usize],
    pred: &[usize],
    truth: &[usize],
    truth_outlier: &[bool],
) -> Result<ClusteringScores> {
    if kept.len() != pred.len() || truth.len() != truth_outlier.len() {
        return Err(dim_err("label and index lists differ in length"));
    }
    if let Some(&bad) = kept.iter().find(|&&j| j >= truth.len()) {
        return Err(arg_err(format!("sample {bad} out of range")));
    }
    let total = truth_outlier.iter().filter(|&&o| !o).count();
    if total == 0 {
        return Err(arg_err("no true inliers to score against"));
    }
    let (p, t): (Vec<usize>, Vec<usize>) = kept
        .iter()
        .zip(pred)
        .filter(|(&j, _)| !truth_outlier[j])
        .map(|(&j, &l)| (l, truth[j]))
        .unzip();
    if p.is_empty() {
        return Ok(ClusteringScores {
            acc: 0.0,
            nmi: 0.0,
            pur: 0.0,
        });
    }
    let counts = contingency(&p, &t);
    Ok(ClusteringScores {
        acc: matched(&counts) / total as f64,
        nmi: nmi(&counts),
        pur: purity_hits(&counts) / total as f64,
    })
}

/// Mann-Whitney AUC of `scores` as evidence for the positive class; ties
/// count one half.
pub fn eval_outlier_auc(scores: &[f64], truth_outlier: &[bool]) -> Result<f64> {
    if scores.len() != truth_outlier.len() {
        return Err(dim_err("scores and truth differ in length"));
    }
    let pos: Vec<f64> = scores
        .iter()
        .zip(truth_outlier)
        .filter(|(_, &t)| t)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(truth_outlier)
        .filter(|(_, &t)| !t)
        .map(|(&s, _)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(arg_err("AUC needs both positive and negative samples"));
    }
    let mut wins = 0.0;
    for &a in &pos {
        for &b in &neg {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}

/// Size of the symmetric difference of two index sets over `0..n2`.
pub fn support_distance(a: &[usize], b: &[usize], n2: usize) -> Result<usize> {
    let mut ind = vec![0u8; n2];
    for (set, bit) in [(a, 1u8), (b, 2u8)] {
        for &j in set {
            if j >= n2 {
                return Err(arg_err(format!("index {j} out of range for n2 = {n2}")));
            }
            ind[j] |= bit;
        }
    }
    Ok(ind.iter().filter(|&&v| v == 1 || v == 2).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossed_labels() {
        let s = eval_clustering(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(s.acc, 0.5);
        assert!(s.nmi.abs() < 1e-15);
        assert_eq!(s.pur, 0.5);
    }

    #[test]
    fn perfect_up_to_renaming() {
        let s = eval_clustering(&[5, 5, 9, 9, 2], &[0, 0, 1, 1, 2]).unwrap();
        assert_eq!((s.acc, s.pur), (1.0, 1.0));
        assert!((s.nmi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn removed_inliers_are_wrong() {
        // samples 0..4, sample 3 is a true outlier, sample 1 was removed
        let truth = [0, 0, 1, 1];
        let outlier = [false, false, false, true];
        let s = score_detected_clustering(&[0, 2, 3], &[7, 8, 8], &truth, &outlier).unwrap();
        assert!((s.acc - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.pur - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.nmi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_cases() {
        assert_eq!(
            eval_outlier_auc(&[1.0, 2.0, 3.0, 4.0], &[false, false, true, true]).unwrap(),
            1.0
        );
        assert_eq!(
            eval_outlier_auc(&[1.0; 4], &[false, true, false, true]).unwrap(),
            0.5
        );
        assert!(eval_outlier_auc(&[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn support_distance_cases() {
        assert_eq!(support_distance(&[1, 2], &[1, 2], 5).unwrap(), 0);
        assert_eq!(support_distance(&[0, 1], &[2, 3, 4], 5).unwrap(), 5);
        assert_eq!(support_distance(&[1, 2], &[2, 3], 5).unwrap(), 2);
        assert!(support_distance(&[5], &[], 5).is_err());
    }
}
