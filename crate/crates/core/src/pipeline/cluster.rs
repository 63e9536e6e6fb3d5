use ndarray::{Array2, ArrayView1};
use ndarray_linalg::{Eigh, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, dim_err, Result};
use crate::tensor::Tensor3;

pub const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITERS: usize = 300;

/// `(1/(2 n3)) sum_k (|Z^(k)| + |Z^(k)|^T)` restricted to `inliers`.
pub fn build_affinity(z: &Tensor3, inliers: &[usize]) -> Result<Array2<f64>> {
    let (n2, m2, n3) = z.dims();
    if n2 != m2 {
        return Err(dim_err(format!(
            "representation must be square, got {:?}",
            z.dims()
        )));
    }
    if inliers.is_empty() {
        return Err(arg_err("affinity needs at least one inlier"));
    }
    if let Some(&bad) = inliers.iter().find(|&&j| j >= n2) {
        return Err(arg_err(format!("inlier {bad} out of range for n2 = {n2}")));
    }
    let m = inliers.len();
    let mut w = Array2::<f64>::zeros((m, m));
    for k in 0..n3 {
        let zk = z.frontal(k);
        for (a, &ia) in inliers.iter().enumerate() {
            for (b, &ib) in inliers.iter().enumerate() {
                w[[a, b]] += zk[[ia, ib]].abs() + zk[[ib, ia]].abs();
            }
        }
    }
    w /= 2.0 * n3 as f64;
    Ok(w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Index of the restart that produced the fit.
    pub restart: usize,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_centers(points: &Array2<f64>, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centers = Array2::zeros((c, points.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(0)))
        .collect();
    for ci in 1..c {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(ci).assign(&points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centers.row(ci)));
        }
    }
    centers
}

fn lloyd(points: &Array2<f64>, mut centers: Array2<f64>) -> (Vec<usize>, f64) {
    let (n, dim) = points.dim();
    let c = centers.nrows();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for i in 0..n {
            let mut best = (f64::INFINITY, 0);
            for ci in 0..c {
                let d = sq_dist(points.row(i), centers.row(ci));
                if d < best.0 {
                    best = (d, ci);
                }
            }
            if labels[i] != best.1 {
                labels[i] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros((c, dim));
        let mut counts = vec![0usize; c];
        for i in 0..n {
            let mut row = sums.row_mut(labels[i]);
            row += &points.row(i);
            counts[labels[i]] += 1;
        }
        for ci in 0..c {
            // empty clusters keep their previous center
            if counts[ci] > 0 {
                let mut row = centers.row_mut(ci);
                row.assign(&sums.row(ci));
                row /= counts[ci] as f64;
            }
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(labels[i])))
        .sum();
    (labels, inertia)
}

/// k-means++ seeding followed by Lloyd iterations, repeated `restarts`
/// times; the lowest inertia wins and the earliest restart breaks ties.
pub fn kmeans(points: &Array2<f64>, c: usize, restarts: usize, seed: u64) -> Result<KMeansFit> {
    let n = points.nrows();
    if c == 0 || c > n {
        return Err(arg_err(format!("cannot form {c} clusters from {n} points")));
    }
    if restarts == 0 {
        return Err(arg_err("k-means needs at least one restart"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    for restart in 0..restarts {
        let centers = seed_centers(points, c, &mut rng);
        let (labels, inertia) = lloyd(points, centers);
        if best.as_ref().is_none_or(|b| inertia < b.inertia) {
            best = Some(KMeansFit {
                labels,
                inertia,
                restart,
            });
        }
    }
    Ok(best.expect("at least one restart ran"))
}

/// Normalized-cut clustering: eigenvectors of the `c` smallest eigenvalues of
/// `I - D^{-1/2} W D^{-1/2}`, rows scaled to unit length, then k-means.
/// Labels are renumbered in order of first appearance.
pub fn spectral_cluster(affinity: &Array2<f64>, c: usize, seed: u64) -> Result<Vec<usize>> {
    let (n, m) = affinity.dim();
    if n != m {
        return Err(dim_err(format!("affinity must be square, got {n}x{m}")));
    }
    if c == 0 || c > n {
        return Err(arg_err(format!(
            "cannot form {c} clusters from {n} samples"
        )));
    }
    if affinity.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(arg_err("affinity must be finite and non-negative"));
    }
    if c == 1 {
        return Ok(vec![0; n]);
    }
    let inv_sqrt: Vec<f64> = affinity
        .rows()
        .into_iter()
        .map(|r| {
            let d: f64 = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut lap = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let w = 0.5 * (affinity[[i, j]] + affinity[[j, i]]);
            lap[[i, j]] = -inv_sqrt[i] * w * inv_sqrt[j];
        }
        lap[[i, i]] += 1.0;
    }
    let (_, vecs) = lap.eigh(UPLO::Lower)?;
    let mut emb = vecs.slice(ndarray::s![.., ..c]).to_owned();
    for mut row in emb.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let fit = kmeans(&emb, c, KMEANS_RESTARTS, seed)?;
    let mut rename = vec![usize::MAX; c];
    let mut next = 0;
    Ok(fit
        .labels
        .iter()
        .map(|&l| {
            if rename[l] == usize::MAX {
                rename[l] = next;
                next += 1;
            }
            rename[l]
        })
        .collect())
}
