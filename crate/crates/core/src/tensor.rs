//! Dense real third-order tensors.
//!
//! Values are stored slice-major: the frontal slice index `k` is outermost,
//! then the column `j`, then the row `i`. Every frontal slice is therefore a
//! contiguous column-major `n1 x n2` matrix, and every lateral slice (one data
//! sample) is `n3` contiguous runs of `n1` values.

use ndarray::{ArrayView2, ArrayViewMut2, ShapeBuilder};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{arg_err, dim_err, Result, TlrrError};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Tensor3 {
            dims: (n1, n2, n3),
            data: vec![0.0; n1 * n2 * n3],
        }
    }

    /// Wraps a slice-major buffer. Fails if the length does not match or a
    /// value is not finite.
    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        let (n1, n2, n3) = dims;
        if n1 * n2 * n3 != data.len() {
            return Err(dim_err(format!(
                "{}x{}x{} tensor needs {} values, got {}",
                n1,
                n2,
                n3,
                n1 * n2 * n3,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TlrrError::NonFinite);
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn from_fn(
        n1: usize,
        n2: usize,
        n3: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Tensor3 {
            dims: (n1, n2, n3),
            data,
        }
    }

    /// Entries drawn i.i.d. from `N(0, std^2)`, in storage order.
    pub fn random_normal<R: Rng + ?Sized>(
        n1: usize,
        n2: usize,
        n3: usize,
        std: f64,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
        let data = (0..n1 * n2 * n3).map(|_| normal.sample(rng)).collect();
        Tensor3 {
            dims: (n1, n2, n3),
            data,
        }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn n1(&self) -> usize {
        self.dims.0
    }

    #[inline]
    pub fn n2(&self) -> usize {
        self.dims.1
    }

    #[inline]
    pub fn n3(&self) -> usize {
        self.dims.2
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (n1, n2, _) = self.dims;
        i + n1 * (j + n2 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Frontal slice `k` as a column-major `n1 x n2` view.
    pub fn frontal(&self, k: usize) -> ArrayView2<'_, f64> {
        let (n1, n2, _) = self.dims;
        let s = n1 * n2;
        ArrayView2::from_shape((n1, n2).f(), &self.data[k * s..(k + 1) * s]).unwrap()
    }

    pub fn frontal_mut(&mut self, k: usize) -> ArrayViewMut2<'_, f64> {
        let (n1, n2, _) = self.dims;
        let s = n1 * n2;
        ArrayViewMut2::from_shape((n1, n2).f(), &mut self.data[k * s..(k + 1) * s]).unwrap()
    }

    /// Squared Frobenius norm of every lateral slice `A(:, j, :)`.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let (n1, n2, n3) = self.dims;
        let mut out = vec![0.0; n2];
        for k in 0..n3 {
            for (j, acc) in out.iter_mut().enumerate() {
                let base = n1 * (j + n2 * k);
                *acc += self.data[base..base + n1]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>();
            }
        }
        out
    }

    /// Multiplies lateral slice `j` by `factors[j]`.
    pub fn scale_columns(&mut self, factors: &[f64]) {
        let (n1, n2, n3) = self.dims;
        assert_eq!(factors.len(), n2);
        for k in 0..n3 {
            for (j, &f) in factors.iter().enumerate() {
                let base = n1 * (j + n2 * k);
                self.data[base..base + n1].iter_mut().for_each(|v| *v *= f);
            }
        }
    }

    /// Copies the listed lateral slices, in order, into a new tensor.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Tensor3> {
        let (n1, n2, n3) = self.dims;
        if let Some(&bad) = cols.iter().find(|&&j| j >= n2) {
            return Err(arg_err(format!("column {bad} out of range for n2 = {n2}")));
        }
        let mut out = Tensor3::zeros(n1, cols.len(), n3);
        for k in 0..n3 {
            for (jj, &j) in cols.iter().enumerate() {
                let src = n1 * (j + n2 * k);
                let dst = n1 * (jj + cols.len() * k);
                out.data[dst..dst + n1].copy_from_slice(&self.data[src..src + n1]);
            }
        }
        Ok(out)
    }

    /// Zeroes every lateral slice whose index is not in `keep`.
    pub fn mask_columns(&self, keep: &[bool]) -> Tensor3 {
        let factors: Vec<f64> = keep.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mut out = self.clone();
        out.scale_columns(&factors);
        out
    }

    /// Horizontal concatenation `[A_1, ..., A_m]` along the column mode.
    pub fn concat_columns(parts: &[Tensor3]) -> Result<Tensor3> {
        let first = parts
            .first()
            .ok_or_else(|| arg_err("cannot concatenate zero tensors"))?;
        let (n1, _, n3) = first.dims;
        if parts.iter().any(|p| p.n1() != n1 || p.n3() != n3) {
            return Err(dim_err("concatenated tensors must share n1 and n3"));
        }
        let n2: usize = parts.iter().map(|p| p.n2()).sum();
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for p in parts {
                let s = n1 * p.n2();
                data.extend_from_slice(&p.data[k * s..(k + 1) * s]);
            }
        }
        Ok(Tensor3 {
            dims: (n1, n2, n3),
            data,
        })
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spatial inner product `sum_ijk A_ijk B_ijk`.
    pub fn dot(&self, other: &Tensor3) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn check_same(&self, other: &Tensor3) -> Result<()> {
        if self.dims != other.dims {
            return Err(dim_err(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Tensor3) -> Result<Tensor3> {
        self.check_same(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Tensor3 {
            dims: self.dims,
            data,
        })
    }

    /// In-place `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor3) -> Result<()> {
        self.check_same(other)?;
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += alpha * b);
        Ok(())
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.add_scaled(-1.0, other)
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.add_scaled(1.0, other)
    }

    pub fn scaled(&self, alpha: f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `max |A_ijk - B_ijk|`.
    pub fn max_abs_diff(&self, other: &Tensor3) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `||self - other||_F / ||other||_F`, or the absolute error when `other` is zero.
    pub fn rel_error(&self, reference: &Tensor3) -> Result<f64> {
        self.check_same(reference)?;
        let num = self
            .data
            .iter()
            .zip(&reference.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den = reference.frobenius();
        Ok(if den > 0.0 { num / den } else { num })
    }
}
