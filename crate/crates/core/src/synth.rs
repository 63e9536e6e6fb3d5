//! Synthetic union-of-subspaces data, outlier corruption and missing masks.
//!
//! All randomness comes from `ChaCha8Rng` seeded with the instance seed, so
//! an instance is a pure function of its parameters.

use ndarray::Array2;
use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{arg_err, dim_err, Result};
use crate::solver_missing::ObservationMask;
use crate::spectral::{Field, Slices};
use crate::tensor::Tensor3;
use crate::tlinalg::t_product;
use crate::transforms::{TransformKind, TransformSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticParams {
    pub n1: usize,
    pub n3: usize,
    /// Subspace dimension per subspace; `c = ranks.len()`.
    pub ranks: Vec<usize>,
    /// Samples per subspace, same length as `ranks`.
    pub sizes: Vec<usize>,
    /// Probability that a sample is replaced by an outlier.
    pub rho: f64,
    pub seed: u64,
}

impl SyntheticParams {
    /// `c` subspaces of dimension `n1 / 10` with `n1` samples each.
    pub fn standard(n1: usize, n3: usize, c: usize, rho: f64, seed: u64) -> Self {
        let r = (n1 / 10).max(1);
        SyntheticParams {
            n1,
            n3,
            ranks: vec![r; c],
            sizes: vec![n1; c],
            rho,
            seed,
        }
    }

    pub fn clusters(&self) -> usize {
        self.ranks.len()
    }

    pub fn n2(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n3 == 0 {
            return Err(arg_err("n1 and n3 must be positive"));
        }
        if self.ranks.is_empty() || self.ranks.len() != self.sizes.len() {
            return Err(arg_err(
                "ranks and sizes must be non-empty and of equal length",
            ));
        }
        if self.ranks.iter().chain(&self.sizes).any(|&v| v == 0) {
            return Err(arg_err("subspace ranks and sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(arg_err(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticInstance {
    pub x: Tensor3,
    pub l0: Tensor3,
    pub e0: Tensor3,
    /// Sorted outlier column indices.
    pub theta0: Vec<usize>,
    /// Subspace each column was drawn from (outlier columns keep the index
    /// of the sample they replaced).
    pub labels: Vec<usize>,
    pub params: SyntheticParams,
    pub kind: TransformKind,
}

impl SyntheticInstance {
    pub fn is_outlier(&self) -> Vec<bool> {
        let mut out = vec![false; self.x.n2()];
        for &j in &self.theta0 {
            out[j] = true;
        }
        out
    }

    pub fn inliers(&self) -> Vec<usize> {
        let flags = self.is_outlier();
        (0..flags.len()).filter(|&j| !flags[j]).collect()
    }
}

/// Builds `Q = [A_1*B_1, ..., A_c*B_c]` with `N(0, 1/n1)` factors, turns each
/// column into an outlier with probability `rho`, and draws outlier entries
/// from `N(0, zeta/(n1 n3))` where `zeta` is the mean squared column norm of `Q`.
pub fn generate_instance(
    params: &SyntheticParams,
    spec: &TransformSpec,
) -> Result<SyntheticInstance> {
    params.validate()?;
    if params.n3 != spec.n3() {
        return Err(dim_err(format!(
            "params n3 = {} but transform has n3 = {}",
            params.n3,
            spec.n3()
        )));
    }
    let (n1, n3) = (params.n1, params.n3);
    let n2 = params.n2();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let std = (1.0 / n1 as f64).sqrt();

    let mut blocks = Vec::with_capacity(params.clusters());
    let mut labels = Vec::with_capacity(n2);
    for (l, (&r, &s)) in params.ranks.iter().zip(&params.sizes).enumerate() {
        let a = Tensor3::random_normal(n1, r, n3, std, &mut rng);
        let b = Tensor3::random_normal(r, s, n3, std, &mut rng);
        blocks.push(t_product(&a, &b, spec)?);
        labels.extend(std::iter::repeat_n(l, s));
    }
    let q = Tensor3::concat_columns(&blocks)?;

    let theta0: Vec<usize> = (0..n2)
        .filter(|_| rng.random::<f64>() < params.rho)
        .collect();
    let zeta = q.column_sq_norms().iter().sum::<f64>() / n2 as f64;
    let noise =
        Normal::new(0.0, (zeta / (n1 * n3) as f64).sqrt()).map_err(|e| arg_err(e.to_string()))?;

    let mut e0 = Tensor3::zeros(n1, n2, n3);
    for &j in &theta0 {
        for k in 0..n3 {
            for i in 0..n1 {
                e0.set(i, j, k, noise.sample(&mut rng));
            }
        }
    }
    let mut keep = vec![true; n2];
    for &j in &theta0 {
        keep[j] = false;
    }
    let l0 = q.mask_columns(&keep);
    let x = l0.add(&e0)?;
    Ok(SyntheticInstance {
        x,
        l0,
        e0,
        theta0,
        labels,
        params: params.clone(),
        kind: spec.kind(),
    })
}

/// Hides exactly `floor(delta * N)` uniformly chosen entries and zero-fills them.
pub fn apply_missing_mask(
    x: &Tensor3,
    delta: f64,
    seed: u64,
) -> Result<(Tensor3, ObservationMask)> {
    if !(0.0..1.0).contains(&delta) {
        return Err(arg_err(format!("delta must lie in [0, 1), got {delta}")));
    }
    let total = x.len();
    let hidden = (delta * total as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = vec![true; total];
    let mut x_miss = x.clone();
    for pos in index::sample(&mut rng, total, hidden) {
        bits[pos] = false;
        x_miss.as_mut_slice()[pos] = 0.0;
    }
    Ok((x_miss, ObservationMask::from_bits(x.dims(), bits)?))
}

/// Lifts a vector representation `X = A Z` (columns of `a_mat` are
/// vectorized `n1 x n3` samples, row index `i + n1 k`) to tensors with
/// `A * Z_(j) = ivec(A z_j)`.
pub fn lift_vector_representation(
    a_mat: &Array2<f64>,
    z_mat: &Array2<f64>,
    spec: &TransformSpec,
) -> Result<(Tensor3, Tensor3)> {
    let n3 = spec.n3();
    let (rows, p) = a_mat.dim();
    if rows % n3 != 0 || rows == 0 {
        return Err(dim_err(format!(
            "{rows} rows cannot be split into tubes of length {n3}"
        )));
    }
    if z_mat.nrows() != p {
        return Err(dim_err(format!(
            "A has {p} columns but Z has {} rows",
            z_mat.nrows()
        )));
    }
    let n1 = rows / n3;
    let n2 = z_mat.ncols();
    let a = Tensor3::from_fn(n1, p, n3, |i, j, k| a_mat[[i + n1 * k, j]]);
    let mut zb = Slices::<Complex64>::zeros(p, n2, n3);
    for k in 0..n3 {
        zb.slice_mut(k).assign(&z_mat.mapv(Complex64::from));
    }
    let z = Complex64::inverse(spec, &zb)?;
    Ok((a, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::build_transform;

    #[test]
    fn no_outliers_when_rho_is_zero() {
        let spec = build_transform(TransformKind::Dct, 3, None).unwrap();
        let p = SyntheticParams {
            n1: 4,
            n3: 3,
            ranks: vec![1, 2],
            sizes: vec![3, 2],
            rho: 0.0,
            seed: 7,
        };
        let inst = generate_instance(&p, &spec).unwrap();
        assert!(inst.theta0.is_empty());
        assert!(inst.e0.is_zero());
        assert_eq!(inst.x, inst.l0);
        assert_eq!(inst.labels, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn missing_count_is_exact() {
        let x = Tensor3::from_fn(3, 4, 5, |i, j, k| (i + j + k) as f64 + 1.0);
        let (xm, mask) = apply_missing_mask(&x, 0.1, 3).unwrap();
        assert_eq!(x.len() - mask.count_observed(), 6);
        assert_eq!(xm.as_slice().iter().filter(|&&v| v == 0.0).count(), 6);
        assert!(apply_missing_mask(&x, 1.0, 3).is_err());
    }

    #[test]
    fn bad_params_rejected() {
        let spec = build_transform(TransformKind::Dct, 2, None).unwrap();
        let mut p = SyntheticParams::standard(10, 2, 2, 0.1, 1);
        p.rho = 1.0;
        assert!(generate_instance(&p, &spec).is_err());
        let p = SyntheticParams::standard(10, 3, 2, 0.1, 1);
        assert!(generate_instance(&p, &spec).is_err());
    }
}
