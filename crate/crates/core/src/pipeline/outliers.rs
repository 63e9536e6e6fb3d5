use crate::error::{arg_err, Result};
use crate::tensor::Tensor3;

#[derive(Clone, Debug, PartialEq)]
pub struct OutlierPartition {
    pub scores: Vec<f64>,
    /// Sorted indices of detected outliers.
    pub outliers: Vec<usize>,
    /// Sorted indices of the remaining samples.
    pub inliers: Vec<usize>,
    /// Scores strictly above this value are outliers.
    pub threshold: f64,
}

/// `||E(:, j, :)||_F^2` for every sample `j`.
pub fn outlier_scores(e: &Tensor3) -> Vec<f64> {
    e.column_sq_norms()
}

fn sse(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Exact two-means on the real line. Candidate splits sit between distinct
/// consecutive sorted scores; the split with the smallest within-cluster sum
/// of squares wins, ties going to the one with fewer outliers. With no gap
/// at all every sample is an inlier.
pub fn detect_outliers(scores: &[f64]) -> Result<OutlierPartition> {
    if scores.len() < 2 {
        return Err(arg_err("outlier detection needs at least two samples"));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(arg_err("outlier scores must be finite"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();

    let mut best: Option<(f64, usize)> = None;
    for split in 1..n {
        if sorted[split - 1] >= sorted[split] {
            continue;
        }
        let cost = sse(&sorted[..split]) + sse(&sorted[split..]);
        if best.is_none_or(|(c, _)| cost <= c) {
            best = Some((cost, split));
        }
    }
    let threshold = match best {
        Some((_, split)) => 0.5 * (sorted[split - 1] + sorted[split]),
        None => sorted[n - 1],
    };
    let (outliers, inliers): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&j| scores[j] > threshold);
    Ok(OutlierPartition {
        scores: scores.to_vec(),
        outliers,
        inliers,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_levels() {
        let p = detect_outliers(&[0.0, 10.0, 0.0, 0.0, 10.0]).unwrap();
        assert_eq!(p.outliers, vec![1, 4]);
        assert_eq!(p.inliers, vec![0, 2, 3]);
    }

    #[test]
    fn constant_scores_have_no_outliers() {
        let p = detect_outliers(&[2.0; 6]).unwrap();
        assert!(p.outliers.is_empty());
        assert_eq!(p.inliers.len(), 6);
    }

    #[test]
    fn symmetric_tie_prefers_fewer_outliers() {
        // {0, 1} | {2} and {0} | {1, 2} cost the same
        let p = detect_outliers(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.outliers, vec![2]);
    }

    #[test]
    fn too_few_samples() {
        assert!(detect_outliers(&[1.0]).is_err());
    }
}
