//! Randomized comparisons of the core operators against slow, independent
//! oracles. Used by the `prox-check` command.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::solver::{prox_l21, prox_tensor_nuclear};
use crate::solver_missing::{prox_l1_masked, prox_l21_masked, ObservationMask};
use crate::tensor::Tensor3;
use crate::tlinalg::{t_product, t_svd_skinny, DEFAULT_RANK_TOL};
use crate::transforms::{build_transform, TransformKind, TransformSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    /// Largest discrepancy seen over all cases.
    pub worst: f64,
    pub tol: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.worst <= self.tol
    }
}

/// `L(A)` by the explicit matrix sum over each tube.
fn dense_forward(a: &Tensor3, spec: &TransformSpec) -> Vec<Array2<Complex64>> {
    let (n1, n2, n3) = a.dims();
    let l = spec.matrix();
    (0..n3)
        .map(|k| {
            Array2::from_shape_fn((n1, n2), |(i, j)| {
                (0..n3).map(|m| l[[k, m]] * a.get(i, j, m)).sum()
            })
        })
        .collect()
}

fn dense_inverse(slices: &[Array2<Complex64>], spec: &TransformSpec) -> Tensor3 {
    let n3 = slices.len();
    let (n1, n2) = slices[0].dim();
    let l = spec.matrix();
    let tau = spec.tau();
    // L^{-1} = L^H / tau
    Tensor3::from_fn(n1, n2, n3, |i, j, k| {
        (0..n3)
            .map(|m| l[[m, k]].conj() * slices[m][[i, j]])
            .sum::<Complex64>()
            .re
            / tau
    })
}

/// Prox of `thresh * ||.||_*` on one slice from the eigenpairs of `B^H B`.
fn svt_by_eigh(b: &Array2<Complex64>, thresh: f64) -> Result<Array2<Complex64>> {
    use ndarray::ShapeBuilder;
    let n = b.ncols();
    // column-major so LAPACK sees B^H B itself rather than its conjugate
    let mut bhb = Array2::<Complex64>::zeros((n, n).f());
    bhb.assign(&b.t().mapv(|v| v.conj()).dot(b));
    let (vals, vecs) = bhb.eigh(UPLO::Lower)?;
    let mut scaled = vecs.clone();
    for (c, &lam) in vals.iter().enumerate() {
        let sigma = lam.max(0.0).sqrt();
        let f = if sigma > thresh {
            1.0 - thresh / sigma
        } else {
            0.0
        };
        scaled.column_mut(c).mapv_inplace(|v| v * f);
    }
    Ok(b.dot(&scaled).dot(&vecs.t().mapv(|v| v.conj())))
}

/// Golden-section minimizer of a unimodal function on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> (usize, usize, usize) {
    (
        rng.random_range(1..=max),
        rng.random_range(1..=max),
        rng.random_range(1..=max),
    )
}

fn random_spec(rng: &mut ChaCha8Rng, n3: usize) -> Result<TransformSpec> {
    let kind = match rng.random_range(0..3) {
        0 => TransformKind::Dft,
        1 => TransformKind::Dct,
        _ => TransformKind::RandomOrthogonal,
    };
    let seed = (kind == TransformKind::RandomOrthogonal).then(|| rng.random());
    build_transform(kind, n3, seed)
}

fn normal(rng: &mut ChaCha8Rng, dims: (usize, usize, usize)) -> Tensor3 {
    Tensor3::random_normal(dims.0, dims.1, dims.2, 1.0, rng)
}

/// Runs every oracle suite for `cases` random instances.
pub fn run_all(cases: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 6];
    for _ in 0..cases {
        let (n1, n2, n3) = random_dims(&mut rng, 6);
        let spec = random_spec(&mut rng, n3)?;
        let a = normal(&mut rng, (n1, n2, n3));
        let m = rng.random_range(1..=6);
        let b = normal(&mut rng, (n2, m, n3));

        // t-product against slice products of the dense transform
        let fast = t_product(&a, &b, &spec)?;
        let (sa, sb) = (dense_forward(&a, &spec), dense_forward(&b, &spec));
        let prod: Vec<_> = sa.iter().zip(&sb).map(|(x, y)| x.dot(y)).collect();
        let slow = dense_inverse(&prod, &spec);
        worst[0] = worst[0].max(fast.max_abs_diff(&slow)?);

        // skinny t-SVD reconstruction
        let svd = t_svd_skinny(&a, &spec, DEFAULT_RANK_TOL)?;
        worst[1] = worst[1].max(svd.reconstruct(&spec)?.max_abs_diff(&a)?);

        // nuclear prox against the eigen-based slice oracle
        let thresh = rng.random_range(0.05..2.0);
        let fast = prox_tensor_nuclear(&a, thresh, &spec)?;
        let slices = sa
            .iter()
            .map(|s| svt_by_eigh(s, thresh))
            .collect::<Result<Vec<_>>>()?;
        let slow = dense_inverse(&slices, &spec);
        worst[2] = worst[2].max(fast.max_abs_diff(&slow)?);

        // l21 prox against a per-column 1-D minimization over the scale
        let fast = prox_l21(&a, thresh)?;
        let norms = a.column_sq_norms();
        let mut slow = a.clone();
        let scales: Vec<f64> = norms
            .iter()
            .map(|&s| {
                let n = s.sqrt();
                golden_min(|t| thresh * t * n + 0.5 * (1.0 - t).powi(2) * s, 0.0, 1.0)
            })
            .collect();
        slow.scale_columns(&scales);
        worst[3] = worst[3].max(fast.max_abs_diff(&slow)?);

        // masked proxes under a full mask
        let full = ObservationMask::full(a.dims());
        worst[4] = worst[4].max(prox_l21_masked(&a, &full, thresh)?.max_abs_diff(&fast)?);
        let l1 = prox_l1_masked(&a, &full, thresh)?;
        let soft = Tensor3::from_fn(n1, n2, n3, |i, j, k| {
            let v = a.get(i, j, k);
            v.signum() * (v.abs() - thresh).max(0.0)
        });
        worst[5] = worst[5].max(l1.max_abs_diff(&soft)?);
    }
    let names = [
        ("t-product vs dense slice oracle", 1e-10),
        ("t-SVD reconstruction", 1e-10),
        ("nuclear prox vs eigen oracle", 1e-6),
        ("l21 prox vs 1-D minimization", 1e-6),
        ("masked l21 prox, full mask", 0.0),
        ("masked l1 prox vs soft threshold", 1e-14),
    ];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(&(name, tol), w)| CheckOutcome {
            name,
            cases,
            worst: w,
            tol,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        for o in run_all(10, 1).unwrap() {
            assert!(o.passed(), "{o:?}");
        }
    }

    #[test]
    fn dense_round_trip() {
        let spec = build_transform(TransformKind::Dft, 3, None).unwrap();
        let a = Tensor3::from_fn(2, 2, 3, |i, j, k| (i + 2 * j + 3 * k) as f64);
        let back = dense_inverse(&dense_forward(&a, &spec), &spec);
        assert!(back.max_abs_diff(&a).unwrap() < 1e-12);
    }
}
