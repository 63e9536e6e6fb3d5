//! Transform-domain storage and the per-slice dense kernels built on LAPACK.
//!
//! Everything here is generic over [`Field`], which is `f64` for transforms
//! with a real matrix (DCT, random orthogonal) and `Complex64` for the DFT.
//! Frontal slices are stored the same way as in [`Tensor3`](crate::Tensor3):
//! slice-major, each slice a contiguous column-major matrix.

use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewMut2, LinalgScalar, ShapeBuilder};
use ndarray_linalg::{InverseC, JobSvd, Lapack, Scalar, SVDDC};
use num_complex::Complex64;

use crate::error::{dim_err, Result};
use crate::tensor::Tensor3;
use crate::transforms::TransformSpec;

/// Scalar type of transform-domain data.
pub trait Field: Scalar<Real = f64> + Lapack + LinalgScalar + Send + Sync {
    const IS_COMPLEX: bool;

    fn to_complex(self) -> Complex64;

    /// `L(x)` for a real spatial tensor.
    fn forward(spec: &TransformSpec, x: &Tensor3) -> Result<Slices<Self>>;

    /// `L^{-1}(x)`; errors if the result is not real to round-off.
    fn inverse(spec: &TransformSpec, x: &Slices<Self>) -> Result<Tensor3>;
}

/// A stack of `n3` frontal slices of size `n1 x n2` in the transform domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Slices<A> {
    pub(crate) dims: (usize, usize, usize),
    pub(crate) data: Vec<A>,
}

impl<A: Field> Slices<A> {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Slices {
            dims: (n1, n2, n3),
            data: vec![A::zero(); n1 * n2 * n3],
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<A>) -> Result<Self> {
        if dims.0 * dims.1 * dims.2 != data.len() {
            return Err(dim_err(format!(
                "{dims:?} needs {} values, got {}",
                dims.0 * dims.1 * dims.2,
                data.len()
            )));
        }
        Ok(Slices { dims, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn as_slice(&self) -> &[A] {
        &self.data
    }

    pub fn slice(&self, k: usize) -> ArrayView2<'_, A> {
        let (n1, n2, _) = self.dims;
        let s = n1 * n2;
        ArrayView2::from_shape((n1, n2).f(), &self.data[k * s..(k + 1) * s]).unwrap()
    }

    pub fn slice_mut(&mut self, k: usize) -> ArrayViewMut2<'_, A> {
        let (n1, n2, _) = self.dims;
        let s = n1 * n2;
        ArrayViewMut2::from_shape((n1, n2).f(), &mut self.data[k * s..(k + 1) * s]).unwrap()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.square()).sum::<f64>().sqrt()
    }

    /// `self + alpha * other`, elementwise.
    pub fn add_scaled(&self, alpha: f64, other: &Slices<A>) -> Result<Slices<A>> {
        if self.dims != other.dims {
            return Err(dim_err(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let a = A::from_real(alpha);
        Ok(Slices {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| x + a * y)
                .collect(),
        })
    }

    pub fn axpy(&mut self, alpha: f64, other: &Slices<A>) {
        assert_eq!(self.dims, other.dims);
        let a = A::from_real(alpha);
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(x, &y)| *x += a * y);
    }

    /// Lateral slice `j` squared norm, summed over all frontal slices.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let (n1, n2, n3) = self.dims;
        let mut out = vec![0.0; n2];
        for k in 0..n3 {
            for (j, acc) in out.iter_mut().enumerate() {
                let base = n1 * (j + n2 * k);
                *acc += self.data[base..base + n1]
                    .iter()
                    .map(|v| v.square())
                    .sum::<f64>();
            }
        }
        out
    }
}

/// One slice to compute, plus the slice that receives its conjugate (DFT of
/// real data only).
#[derive(Clone, Copy, Debug)]
pub(crate) struct SliceTask {
    pub k: usize,
    pub mirror: Option<usize>,
}

/// Builds an `n1 x n2 x n3` stack by evaluating `f` on the independent slices
/// of `spec` and filling conjugate mirrors.
pub(crate) fn build_slices<A: Field>(
    spec: &TransformSpec,
    n1: usize,
    n2: usize,
    mut f: impl FnMut(usize) -> Result<Array2<A>>,
) -> Result<Slices<A>> {
    let n3 = spec.n3();
    let mut out = Slices::<A>::zeros(n1, n2, n3);
    for task in spec.slice_tasks::<A>() {
        let m = f(task.k)?;
        if m.dim() != (n1, n2) {
            return Err(dim_err(format!(
                "slice kernel produced {:?}, expected {:?}",
                m.dim(),
                (n1, n2)
            )));
        }
        out.slice_mut(task.k).assign(&m);
        if let Some(t) = task.mirror {
            out.slice_mut(t).assign(&m.mapv(|v| v.conj()));
        }
    }
    Ok(out)
}

/// Conjugate transpose of a dense matrix.
pub(crate) fn hermitian<A: Field>(a: &ArrayView2<'_, A>) -> Array2<A> {
    let mut out = Array2::zeros((a.ncols(), a.nrows()).f());
    for ((i, j), v) in a.indexed_iter() {
        out[[j, i]] = v.conj();
    }
    out
}

/// Thin SVD `a = U diag(s) Vh` with `min(m, n)` singular triplets,
/// singular values descending.
pub(crate) fn thin_svd<A: Field>(
    a: &ArrayView2<'_, A>,
) -> Result<(Array2<A>, Array1<f64>, Array2<A>)> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Ok((
            Array2::zeros((m, 0)),
            Array1::zeros(0),
            Array2::zeros((0, n)),
        ));
    }
    let (u, sv, vt) = a.svddc(JobSvd::Some)?;
    Ok((
        u.expect("JobSvd::Some returns U"),
        sv,
        vt.expect("JobSvd::Some returns Vh"),
    ))
}

/// Singular values only.
pub(crate) fn singular_values<A: Field>(a: &ArrayView2<'_, A>) -> Result<Array1<f64>> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Ok(Array1::zeros(0));
    }
    let (_, sv, _) = a.svddc(JobSvd::None)?;
    // some layouts come back padded past min(m, n)
    Ok(sv.slice(s![..m.min(n)]).to_owned())
}

/// Singular value thresholding: shrinks every singular value by `thresh`.
pub(crate) fn svt<A: Field>(a: &ArrayView2<'_, A>, thresh: f64) -> Result<Array2<A>> {
    let (m, n) = a.dim();
    // sigma_max <= ||a||_F, so everything shrinks to zero
    let fro = a.iter().map(|v| v.square()).sum::<f64>().sqrt();
    if fro <= thresh {
        return Ok(Array2::zeros((m, n).f()));
    }
    let (u, sv, vt) = thin_svd(a)?;
    let keep = sv.iter().take_while(|&&v| v > thresh).count();
    if keep == 0 {
        return Ok(Array2::zeros((m, n).f()));
    }
    let mut us = u.slice(s![.., ..keep]).to_owned();
    for (c, &sigma) in sv.iter().take(keep).enumerate() {
        let w = A::from_real(sigma - thresh);
        us.column_mut(c).mapv_inplace(|v| v * w);
    }
    Ok(us.dot(&vt.slice(s![..keep, ..])))
}

/// Inverse of a Hermitian positive definite matrix.
pub(crate) fn inv_hpd<A: Field>(a: &Array2<A>) -> Result<Array2<A>> {
    Ok(a.invc()?)
}

/// Moore-Penrose pseudo-inverse with relative cutoff `tol * sigma_max`.
pub(crate) fn pinv<A: Field>(a: &ArrayView2<'_, A>, tol: f64) -> Result<Array2<A>> {
    let (m, n) = a.dim();
    let (u, sv, vt) = thin_svd(a)?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let mut out = Array2::<A>::zeros((n, m));
    if smax == 0.0 {
        return Ok(out);
    }
    for (c, &sigma) in sv.iter().enumerate() {
        if sigma <= tol * smax {
            break;
        }
        let inv = A::from_real(1.0 / sigma);
        // out += v_c * inv * u_c^H
        for i in 0..n {
            let vi = vt[[c, i]].conj() * inv;
            for j in 0..m {
                out[[i, j]] += vi * u[[j, c]].conj();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn svt_scalar_cases() {
        let a = array![[3.0_f64]];
        assert!((svt(&a.view(), 2.0).unwrap()[[0, 0]] - 1.0).abs() < 1e-15);
        let b = array![[1.0_f64]];
        assert_eq!(svt(&b.view(), 2.0).unwrap()[[0, 0]], 0.0);
        let c = array![[-3.0_f64]];
        assert!((svt(&c.view(), 2.0).unwrap()[[0, 0]] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pinv_of_rank_one() {
        // [1 2; 2 4] = 5 * uu^T with u = (1,2)/sqrt5 ; pinv = uu^T / 5 * (1/5)... = a / 25
        let a = array![[1.0_f64, 2.0], [2.0, 4.0]];
        let p = pinv(&a.view(), 1e-12).unwrap();
        for (x, y) in p.iter().zip(a.iter()) {
            assert!((x - y / 25.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hermitian_conjugates() {
        let a = array![[Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0)]];
        let h = hermitian(&a.view());
        assert_eq!(h.dim(), (2, 1));
        assert_eq!(h[[0, 0]], Complex64::new(1.0, -2.0));
        assert_eq!(h[[1, 0]], Complex64::new(0.0, 1.0));
    }
}
