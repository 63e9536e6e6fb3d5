//! Tensor algebra under a transform: t-product, conjugate transpose,
//! identity, skinny t-SVD, tubal rank, norms and pseudo-inverse.
//!
//! Each operation maps its operands into the transform domain, works on the
//! frontal slices independently and maps back. The generic `*_slices`
//! variants stay in the transform domain and are what the solvers use.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{arg_err, dim_err, Result, TlrrError};
use crate::spectral::{self, build_slices, Field, SliceTask, Slices};
use crate::tensor::Tensor3;
use crate::transforms::{TransformId, TransformKind, TransformSpec};

/// Default relative cutoff for numerical tubal rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Runs a generic function with the transform-domain scalar that matches `spec`.
macro_rules! with_field {
    ($spec:expr, $f:ident ( $($arg:expr),* $(,)? )) => {
        if $spec.is_real() {
            $f::<f64>($($arg),*)
        } else {
            $f::<num_complex::Complex64>($($arg),*)
        }
    };
}
pub(crate) use with_field;

/// `a^H b` for dense matrices.
pub(crate) fn mul_ah_b<A: Field>(a: &ArrayView2<'_, A>, b: &ArrayView2<'_, A>) -> Array2<A> {
    if A::IS_COMPLEX {
        a.t().mapv(|v| v.conj()).dot(b)
    } else {
        a.t().dot(b)
    }
}

/// `a b^H` for dense matrices.
pub(crate) fn mul_a_bh<A: Field>(a: &ArrayView2<'_, A>, b: &ArrayView2<'_, A>) -> Array2<A> {
    if A::IS_COMPLEX {
        a.dot(&b.t().mapv(|v| v.conj()))
    } else {
        a.dot(&b.t())
    }
}

/// Frontal-slice-wise product `a ⊙ b`.
pub(crate) fn slice_mul<A: Field>(
    spec: &TransformSpec,
    a: &Slices<A>,
    b: &Slices<A>,
) -> Result<Slices<A>> {
    let (n1, n2, _) = a.dims();
    let (m2, n4, _) = b.dims();
    if n2 != m2 || a.dims().2 != b.dims().2 {
        return Err(dim_err(format!(
            "cannot multiply {:?} by {:?}",
            a.dims(),
            b.dims()
        )));
    }
    build_slices(spec, n1, n4, |k| Ok(a.slice(k).dot(&b.slice(k))))
}

fn check_tube(a: &Tensor3, spec: &TransformSpec) -> Result<()> {
    if a.n3() != spec.n3() {
        return Err(dim_err(format!(
            "tube length {} does not match transform {}",
            a.n3(),
            spec.id()
        )));
    }
    Ok(())
}

fn t_product_in<A: Field>(a: &Tensor3, b: &Tensor3, spec: &TransformSpec) -> Result<Tensor3> {
    let ab = A::forward(spec, a)?;
    let bb = A::forward(spec, b)?;
    A::inverse(spec, &slice_mul(spec, &ab, &bb)?)
}

/// t-product `A * B` under `spec`: `L(C) = L(A) ⊙ L(B)`.
pub fn t_product(a: &Tensor3, b: &Tensor3, spec: &TransformSpec) -> Result<Tensor3> {
    check_tube(a, spec)?;
    check_tube(b, spec)?;
    if a.n2() != b.n1() {
        return Err(dim_err(format!(
            "inner dimensions differ: {:?} * {:?}",
            a.dims(),
            b.dims()
        )));
    }
    with_field!(spec, t_product_in(a, b, spec))
}

fn conj_transpose_in<A: Field>(a: &Tensor3, spec: &TransformSpec) -> Result<Tensor3> {
    let ab = A::forward(spec, a)?;
    let (n1, n2, _) = ab.dims();
    let out = build_slices(spec, n2, n1, |k| Ok(spectral::hermitian(&ab.slice(k))))?;
    A::inverse(spec, &out)
}

/// Conjugate transpose `A^H`: every transform-domain slice is conjugate-transposed.
pub fn conj_transpose(a: &Tensor3, spec: &TransformSpec) -> Result<Tensor3> {
    check_tube(a, spec)?;
    with_field!(spec, conj_transpose_in(a, spec))
}

pub(crate) fn identity_slices<A: Field>(n: usize, n3: usize) -> Slices<A> {
    let mut out = Slices::<A>::zeros(n, n, n3);
    for k in 0..n3 {
        let mut s = out.slice_mut(k);
        for i in 0..n {
            s[[i, i]] = A::one();
        }
    }
    out
}

fn identity_in<A: Field>(n: usize, spec: &TransformSpec) -> Result<Tensor3> {
    A::inverse(spec, &identity_slices::<A>(n, spec.n3()))
}

/// Identity tensor `I_n`: every frontal slice of `L(I_n)` is the identity.
pub fn identity_tensor(n: usize, spec: &TransformSpec) -> Result<Tensor3> {
    if n == 0 {
        return Err(arg_err("identity tensor needs n >= 1"));
    }
    with_field!(spec, identity_in(n, spec))
}

/// Self-conjugate slices of a DFT (`k = 0`, and `k = n3/2` for even `n3`)
/// are real matrices; factoring them with the real SVD keeps the factors real.
fn is_self_conjugate<A: Field>(spec: &TransformSpec, task: &SliceTask) -> bool {
    A::IS_COMPLEX && spec.kind() == TransformKind::Dft && task.mirror.is_none()
}

fn slice_svd<A: Field>(
    spec: &TransformSpec,
    task: &SliceTask,
    m: &ArrayView2<'_, A>,
) -> Result<(Array2<A>, Vec<f64>, Array2<A>)> {
    if is_self_conjugate::<A>(spec, task) {
        let re = m.mapv(|v| v.re());
        let (u, sv, vt) = spectral::thin_svd(&re.view())?;
        Ok((u.mapv(A::from_real), sv.to_vec(), vt.mapv(A::from_real)))
    } else {
        let (u, sv, vt) = spectral::thin_svd(m)?;
        Ok((u, sv.to_vec(), vt))
    }
}

/// Singular values of every transform-domain slice, indexed by slice.
pub(crate) fn slice_singular_values<A: Field>(
    spec: &TransformSpec,
    a: &Slices<A>,
) -> Result<Vec<Vec<f64>>> {
    let n3 = a.dims().2;
    let mut out = vec![Vec::new(); n3];
    for task in spec.slice_tasks::<A>() {
        let sv = spectral::singular_values(&a.slice(task.k))?.to_vec();
        if let Some(m) = task.mirror {
            out[m] = sv.clone();
        }
        out[task.k] = sv;
    }
    Ok(out)
}

fn rank_from_values(values: &[Vec<f64>], tol: f64) -> usize {
    let smax = values
        .iter()
        .flat_map(|v| v.first())
        .fold(0.0_f64, |m, &v| m.max(v));
    if smax == 0.0 {
        return 0;
    }
    let len = values.iter().map(|v| v.len()).max().unwrap_or(0);
    (0..len)
        .filter(|&i| {
            values
                .iter()
                .filter_map(|v| v.get(i))
                .fold(0.0_f64, |m, &x| m.max(x))
                > tol * smax
        })
        .count()
}

/// Transform-domain skinny t-SVD.
#[derive(Clone, Debug)]
pub(crate) struct SkinnySlices<A> {
    pub u: Slices<A>,
    /// `s[k][i]`: i-th singular value of slice `k`, zero past that slice's rank.
    pub s: Vec<Vec<f64>>,
    pub v: Slices<A>,
    pub rank: usize,
}

impl<A: Field> SkinnySlices<A> {
    /// `U ⊙ S` in the transform domain.
    pub fn us(&self) -> Slices<A> {
        let (n1, r, n3) = self.u.dims();
        let mut out = self.u.clone();
        for k in 0..n3 {
            let mut sl = out.slice_mut(k);
            for c in 0..r {
                let w = A::from_real(self.s[k][c]);
                sl.column_mut(c).mapv_inplace(|v| v * w);
            }
        }
        debug_assert_eq!(out.dims(), (n1, r, n3));
        out
    }
}

pub(crate) fn skinny_slices<A: Field>(
    spec: &TransformSpec,
    a: &Slices<A>,
    rank_tol: f64,
) -> Result<SkinnySlices<A>> {
    let (n1, n2, n3) = a.dims();
    let tasks = spec.slice_tasks::<A>();
    let mut factors = Vec::with_capacity(tasks.len());
    let mut values = vec![Vec::new(); n3];
    for task in &tasks {
        let f = slice_svd(spec, task, &a.slice(task.k))?;
        values[task.k] = f.1.clone();
        if let Some(m) = task.mirror {
            values[m] = f.1.clone();
        }
        factors.push(f);
    }
    let rank = rank_from_values(&values, rank_tol);
    let smax = values
        .iter()
        .flat_map(|v| v.first())
        .fold(0.0_f64, |m, &v| m.max(v));
    let mut u = Slices::<A>::zeros(n1, rank, n3);
    let mut v = Slices::<A>::zeros(n2, rank, n3);
    let mut s = vec![vec![0.0; rank]; n3];
    for (task, (uf, sv, vt)) in tasks.iter().zip(&factors) {
        let uk = uf.slice(s![.., ..rank]);
        let vk = spectral::hermitian(&vt.slice(s![..rank, ..]));
        let sk: Vec<f64> = sv[..rank]
            .iter()
            .map(|&x| if x > rank_tol * smax { x } else { 0.0 })
            .collect();
        u.slice_mut(task.k).assign(&uk);
        v.slice_mut(task.k).assign(&vk);
        if let Some(m) = task.mirror {
            u.slice_mut(m).assign(&uk.mapv(|x| x.conj()));
            v.slice_mut(m).assign(&vk.mapv(|x| x.conj()));
            s[m] = sk.clone();
        }
        s[task.k] = sk;
    }
    Ok(SkinnySlices { u, s, v, rank })
}

/// Skinny t-SVD `A = U * S * V^H` with `U: n1 x r x n3`, `S: r x r x n3`,
/// `V: n2 x r x n3` (all spatial-domain tensors).
#[derive(Clone, Debug)]
pub struct SkinnyTSVD {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
    pub rank: usize,
    pub spec_id: TransformId,
}

impl SkinnyTSVD {
    /// Transform-domain singular values: `values[k][i]` is the i-th value of slice `k`.
    pub fn slice_values(&self, spec: &TransformSpec) -> Result<Vec<Vec<f64>>> {
        let sb = Complex64::forward(spec, &self.s)?;
        Ok((0..spec.n3())
            .map(|k| (0..self.rank).map(|i| sb.slice(k)[[i, i]].re).collect())
            .collect())
    }

    /// `U * S * V^H`.
    pub fn reconstruct(&self, spec: &TransformSpec) -> Result<Tensor3> {
        let us = t_product(&self.u, &self.s, spec)?;
        t_product(&us, &conj_transpose(&self.v, spec)?, spec)
    }
}

fn t_svd_in<A: Field>(a: &Tensor3, spec: &TransformSpec, rank_tol: f64) -> Result<SkinnyTSVD> {
    let ab = A::forward(spec, a)?;
    let sk = skinny_slices(spec, &ab, rank_tol)?;
    let r = sk.rank;
    let mut sb = Slices::<A>::zeros(r, r, spec.n3());
    for k in 0..spec.n3() {
        let mut sl = sb.slice_mut(k);
        for i in 0..r {
            sl[[i, i]] = A::from_real(sk.s[k][i]);
        }
    }
    Ok(SkinnyTSVD {
        u: A::inverse(spec, &sk.u)?,
        s: A::inverse(spec, &sb)?,
        v: A::inverse(spec, &sk.v)?,
        rank: r,
        spec_id: spec.id(),
    })
}

/// Skinny t-SVD with numerical tubal rank cutoff `rank_tol * sigma_max`.
pub fn t_svd_skinny(a: &Tensor3, spec: &TransformSpec, rank_tol: f64) -> Result<SkinnyTSVD> {
    check_tube(a, spec)?;
    if !(rank_tol >= 0.0) {
        return Err(arg_err("rank_tol must be non-negative"));
    }
    if !a.is_finite() {
        return Err(TlrrError::NonFinite);
    }
    with_field!(spec, t_svd_in(a, spec, rank_tol))
}

fn values_in<A: Field>(a: &Tensor3, spec: &TransformSpec) -> Result<Vec<Vec<f64>>> {
    slice_singular_values(spec, &A::forward(spec, a)?)
}

/// Singular values of every transform-domain frontal slice.
pub fn transform_singular_values(a: &Tensor3, spec: &TransformSpec) -> Result<Vec<Vec<f64>>> {
    check_tube(a, spec)?;
    with_field!(spec, values_in(a, spec))
}

/// Number of singular tubes whose largest entry exceeds `tol * sigma_max(A)`.
pub fn tubal_rank(a: &Tensor3, spec: &TransformSpec, tol: f64) -> Result<usize> {
    Ok(rank_from_values(&transform_singular_values(a, spec)?, tol))
}

/// `(1/tau) * sum_k ||A_bar^(k)||_*`.
pub fn tensor_nuclear_norm(a: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    let values = transform_singular_values(a, spec)?;
    let total: f64 = values.iter().flat_map(|v| v.iter()).sum();
    Ok(total / spec.tau())
}

/// `max_k ||A_bar^(k)||_2`.
pub fn tensor_spectral_norm(a: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    let values = transform_singular_values(a, spec)?;
    Ok(values
        .iter()
        .flat_map(|v| v.first())
        .fold(0.0, |m: f64, &x| m.max(x)))
}

/// Column-structured norms of a tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    /// `sum_j ||A(:, j, :)||_F`
    pub l21: f64,
    /// `max_j ||A(:, j, :)||_F`
    pub l2inf: f64,
    pub fro: f64,
}

pub fn norms(a: &Tensor3) -> Norms {
    let cols = a.column_sq_norms();
    let l21 = cols.iter().map(|v| v.sqrt()).sum();
    let l2inf = cols.iter().fold(0.0_f64, |m, v| m.max(v.sqrt()));
    let fro = cols.iter().sum::<f64>().sqrt();
    Norms { l21, l2inf, fro }
}

fn inner_in<A: Field>(a: &Tensor3, b: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    let ab = A::forward(spec, a)?;
    let bb = A::forward(spec, b)?;
    let sum: f64 = ab
        .as_slice()
        .iter()
        .zip(bb.as_slice())
        .map(|(x, y)| (x.conj() * *y).re())
        .sum();
    Ok(sum / spec.tau())
}

/// `<A, B>` evaluated in the transform domain as `(1/tau) <A_bar, B_bar>`.
pub fn inner_product_transformed(a: &Tensor3, b: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    check_tube(a, spec)?;
    a.check_same(b)?;
    with_field!(spec, inner_in(a, b, spec))
}

fn pinv_in<A: Field>(a: &Tensor3, spec: &TransformSpec, tol: f64) -> Result<Tensor3> {
    let ab = A::forward(spec, a)?;
    let (n1, n2, _) = ab.dims();
    let smax = slice_singular_values(spec, &ab)?
        .iter()
        .flat_map(|v| v.first())
        .fold(0.0_f64, |m, &x| m.max(x));
    let out = build_slices(spec, n2, n1, |k| {
        let sl = ab.slice(k);
        let local = spectral::singular_values(&sl)?
            .first()
            .copied()
            .unwrap_or(0.0);
        // cutoff relative to the whole tensor, expressed per slice
        let rel = if local > 0.0 { tol * smax / local } else { 0.0 };
        spectral::pinv(&sl, rel)
    })?;
    A::inverse(spec, &out)
}

/// Moore-Penrose pseudo-inverse; singular values at or below
/// `tol * sigma_max(A)` are treated as zero.
pub fn pseudo_inverse(a: &Tensor3, spec: &TransformSpec, tol: f64) -> Result<Tensor3> {
    check_tube(a, spec)?;
    if !(tol >= 0.0) {
        return Err(arg_err("tol must be non-negative"));
    }
    with_field!(spec, pinv_in(a, spec, tol))
}
