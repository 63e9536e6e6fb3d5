//! Slow reference implementations shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlrr_core::{build_transform, Tensor3, TransformKind, TransformSpec};

pub const KINDS: [TransformKind; 3] = [
    TransformKind::Dft,
    TransformKind::Dct,
    TransformKind::RandomOrthogonal,
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn spec(kind: TransformKind, n3: usize, seed: u64) -> TransformSpec {
    let s = (kind == TransformKind::RandomOrthogonal).then_some(seed);
    build_transform(kind, n3, s).unwrap()
}

pub fn normal(rng: &mut ChaCha8Rng, n1: usize, n2: usize, n3: usize) -> Tensor3 {
    Tensor3::random_normal(n1, n2, n3, 1.0, rng)
}

pub fn random_kind(rng: &mut ChaCha8Rng) -> TransformKind {
    KINDS[rng.random_range(0..3)]
}

/// `L(A)` as explicit sums over the transform matrix entries.
pub fn forward(a: &Tensor3, spec: &TransformSpec) -> Vec<Array2<Complex64>> {
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

/// `L^{-1} = L^H / tau`, real part.
pub fn inverse(slices: &[Array2<Complex64>], spec: &TransformSpec) -> Tensor3 {
    let n3 = slices.len();
    let (n1, n2) = slices[0].dim();
    let l = spec.matrix();
    Tensor3::from_fn(n1, n2, n3, |i, j, k| {
        (0..n3)
            .map(|m| l[[m, k]].conj() * slices[m][[i, j]])
            .sum::<Complex64>()
            .re
            / spec.tau()
    })
}

/// Circular convolution of tubes: the DFT t-product by its spatial definition.
pub fn circular_product(a: &Tensor3, b: &Tensor3) -> Tensor3 {
    let (n1, p, n3) = a.dims();
    let n2 = b.n2();
    Tensor3::from_fn(n1, n2, n3, |i, j, k| {
        let mut s = 0.0;
        for m in 0..n3 {
            let km = (k + n3 - m) % n3;
            for q in 0..p {
                s += a.get(i, q, m) * b.get(q, j, km);
            }
        }
        s
    })
}

/// t-product through the dense transform.
pub fn dense_product(a: &Tensor3, b: &Tensor3, spec: &TransformSpec) -> Tensor3 {
    let (fa, fb) = (forward(a, spec), forward(b, spec));
    let prod: Vec<_> = fa.iter().zip(&fb).map(|(x, y)| x.dot(y)).collect();
    inverse(&prod, spec)
}

pub fn hermitian(m: &Array2<Complex64>) -> Array2<Complex64> {
    m.t().mapv(|v| v.conj())
}

/// Singular values of a complex matrix from the eigenvalues of `M^H M`.
pub fn singular_values(m: &Array2<Complex64>) -> Vec<f64> {
    let (vals, _) = gram_eigh(m);
    let mut s: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // the Gram matrix has extra zero eigenvalues when rows < columns
    s.truncate(m.nrows().min(m.ncols()));
    s
}

fn gram_eigh(m: &Array2<Complex64>) -> (Vec<f64>, Array2<Complex64>) {
    let n = m.ncols();
    // column-major so LAPACK factors M^H M rather than its conjugate
    let mut g = Array2::<Complex64>::zeros((n, n).f());
    g.assign(&hermitian(m).dot(m));
    let (vals, vecs) = g.eigh(UPLO::Lower).unwrap();
    (vals.to_vec(), vecs)
}

/// `argmin_Z thresh ||Z||_* + 1/2 ||Z - M||_F^2` from the eigenpairs of `M^H M`.
pub fn svt(m: &Array2<Complex64>, thresh: f64) -> Array2<Complex64> {
    let (vals, vecs) = gram_eigh(m);
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
    m.dot(&scaled).dot(&hermitian(&vecs))
}

/// Golden-section search for the minimizer of a unimodal function.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
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

/// `(1/tau) sum_k ||M_k||_*` from the oracle singular values.
pub fn nuclear_norm(a: &Tensor3, spec: &TransformSpec) -> f64 {
    forward(a, spec)
        .iter()
        .map(|m| singular_values(m).iter().sum::<f64>())
        .sum::<f64>()
        / spec.tau()
}

pub fn l21(a: &Tensor3) -> f64 {
    a.column_sq_norms().iter().map(|s| s.sqrt()).sum()
}

/// Transpose every slice and reverse slices `1..n3`: the DFT conjugate transpose.
pub fn dft_transpose(a: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = a.dims();
    Tensor3::from_fn(n2, n1, n3, |i, j, k| a.get(j, i, (n3 - k) % n3))
}

/// `V0 * V0^H` for the row space of `x`.
pub fn row_projector(x: &Tensor3, spec: &TransformSpec) -> Tensor3 {
    use tlrr_core::tlinalg::{conj_transpose, t_product, t_svd_skinny, DEFAULT_RANK_TOL};
    let v = t_svd_skinny(x, spec, DEFAULT_RANK_TOL).unwrap().v;
    t_product(&v, &conj_transpose(&v, spec).unwrap(), spec).unwrap()
}

/// Relative distance of the solver's `Z` from `V0 * V0^H` on a clean
/// low-tubal-rank instance solved with `lambda = 1e3`.
pub fn noiseless_error(kind: TransformKind, seed: u64) -> f64 {
    use tlrr_core::solver::{solve_ortlrr, SolverConfig};
    use tlrr_core::tlinalg::t_product;
    let spec = spec(kind, 4, seed);
    let mut r = rng(seed);
    let x = t_product(&normal(&mut r, 10, 3, 4), &normal(&mut r, 3, 14, 4), &spec).unwrap();
    let res = solve_ortlrr(&x, &spec, &SolverConfig::new(1e3)).unwrap();
    let p = row_projector(&x, &spec);
    res.z_star.sub(&p).unwrap().frobenius() / p.frobenius()
}

/// Relative gap between the final objectives of the reduced and the direct
/// formulations on a random instance with every dimension at most 8.
pub fn formulation_gap(kind: TransformKind, seed: u64) -> f64 {
    use tlrr_core::solver::{objective, solve_ortlrr, solve_ortlrr_unreduced, SolverConfig};
    let mut r = rng(seed);
    let (n1, n2, n3) = (
        r.random_range(2..=8),
        r.random_range(2..=8),
        r.random_range(1..=8),
    );
    let spec = spec(kind, n3, seed);
    let x = normal(&mut r, n1, n2, n3);
    let lambda = 1.0 / (n1.max(n2) as f64).ln().sqrt();
    let cfg = SolverConfig::new(lambda);
    let a = solve_ortlrr(&x, &spec, &cfg).unwrap();
    let b = solve_ortlrr_unreduced(&x, &spec, &cfg).unwrap();
    let fa = objective(&a.z_star, &a.e_star, lambda, &spec).unwrap();
    let fb = objective(&b.z_star, &b.e_star, lambda, &spec).unwrap();
    (fa - fb).abs() / fa.abs().max(fb.abs())
}

/// ACC of spectral clustering on a shuffled block-diagonal affinity with
/// random positive blocks.
pub fn block_diagonal_acc(seed: u64) -> f64 {
    use rand::seq::SliceRandom;
    use tlrr_core::pipeline::{eval_clustering, spectral_cluster};
    let mut r = rng(seed);
    let c = r.random_range(2..=5);
    let sizes: Vec<usize> = (0..c).map(|_| r.random_range(2..=12)).collect();
    let mut truth: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(l, &s)| vec![l; s])
        .collect();
    truth.shuffle(&mut r);
    let n = truth.len();
    let mut w = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            if truth[i] == truth[j] {
                let v = r.random_range(0.1..1.0);
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
    }
    let pred = spectral_cluster(&w, c, seed).unwrap();
    eval_clustering(&pred, &truth).unwrap().acc
}
