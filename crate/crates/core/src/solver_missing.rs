//! OR-TLRR with entry-wise zero fill for partially observed tensors, plus the
//! elementwise-penalty TLRR variant.

use crate::error::{arg_err, dim_err, Result, TlrrError};
use crate::solver::{self, DataTerm, SolverConfig, SolverResult};
use crate::tensor::Tensor3;
use crate::transforms::TransformSpec;

/// Binary observation pattern `W`; `true` marks an observed entry.
/// Stored in the same slice-major order as [`Tensor3`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMask {
    dims: (usize, usize, usize),
    bits: Vec<bool>,
}

impl ObservationMask {
    pub fn full(dims: (usize, usize, usize)) -> Self {
        ObservationMask {
            dims,
            bits: vec![true; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn empty(dims: (usize, usize, usize)) -> Self {
        ObservationMask {
            dims,
            bits: vec![false; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_bits(dims: (usize, usize, usize), bits: Vec<bool>) -> Result<Self> {
        if dims.0 * dims.1 * dims.2 != bits.len() {
            return Err(dim_err(format!(
                "mask {dims:?} needs {} bits, got {}",
                dims.0 * dims.1 * dims.2,
                bits.len()
            )));
        }
        Ok(ObservationMask { dims, bits })
    }

    /// Nonzero entries of `w` are observed.
    pub fn from_tensor(w: &Tensor3) -> Self {
        ObservationMask {
            dims: w.dims(),
            bits: w.as_slice().iter().map(|&v| v != 0.0).collect(),
        }
    }

    /// The mask as a 0/1 tensor.
    pub fn to_tensor(&self) -> Tensor3 {
        let data = self
            .bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        Tensor3::from_vec(self.dims, data).expect("mask dims are consistent")
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_observed(&self, i: usize, j: usize, k: usize) -> bool {
        let (n1, n2, _) = self.dims;
        self.bits[i + n1 * (j + n2 * k)]
    }

    pub fn count_observed(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Lateral slices with no observed entry at all.
    pub fn unobserved_columns(&self) -> Vec<usize> {
        let (n1, n2, n3) = self.dims;
        let mut seen = vec![false; n2];
        for k in 0..n3 {
            for (j, s) in seen.iter_mut().enumerate() {
                let base = n1 * (j + n2 * k);
                *s |= self.bits[base..base + n1].iter().any(|&b| b);
            }
        }
        (0..n2).filter(|&j| !seen[j]).collect()
    }

    fn check(&self, a: &Tensor3) -> Result<()> {
        if a.dims() != self.dims {
            return Err(dim_err(format!(
                "mask {:?} vs tensor {:?}",
                self.dims,
                a.dims()
            )));
        }
        Ok(())
    }
}

/// Which penalty the observed part of `E` carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Penalty {
    /// Column-sparse `l2,1` (OR-TLRR-EWZF).
    #[default]
    L21,
    /// Entrywise `l1` (TLRR-EWZF).
    L1,
}

impl std::str::FromStr for Penalty {
    type Err = TlrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l21" | "ortlrr" | "ortlrr-ewzf" => Ok(Penalty::L21),
            "l1" | "tlrr" | "tlrr-ewzf" => Ok(Penalty::L1),
            other => Err(arg_err(format!("unknown penalty {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MissingSolverOptions {
    pub penalty: Penalty,
    pub base: SolverConfig,
}

/// `P_Omega(A)`: zeroes unobserved entries.
pub fn project_omega(a: &Tensor3, mask: &ObservationMask) -> Result<Tensor3> {
    mask.check(a)?;
    let mut out = a.clone();
    out.as_mut_slice()
        .iter_mut()
        .zip(&mask.bits)
        .filter(|(_, &b)| !b)
        .for_each(|(v, _)| *v = 0.0);
    Ok(out)
}

fn check_thresh(thresh: f64) -> Result<()> {
    if !(thresh > 0.0) || !thresh.is_finite() {
        return Err(arg_err(format!("threshold must be positive, got {thresh}")));
    }
    Ok(())
}

pub(crate) fn prox_l21_masked_unchecked(
    b: &Tensor3,
    mask: &ObservationMask,
    thresh: f64,
) -> Tensor3 {
    let (n1, n2, n3) = b.dims();
    let mut sq = vec![0.0; n2];
    for k in 0..n3 {
        for (j, acc) in sq.iter_mut().enumerate() {
            let base = n1 * (j + n2 * k);
            *acc += b.as_slice()[base..base + n1]
                .iter()
                .zip(&mask.bits[base..base + n1])
                .filter(|(_, &w)| w)
                .map(|(v, _)| v * v)
                .sum::<f64>();
        }
    }
    let factors: Vec<f64> = sq
        .iter()
        .map(|&s| {
            let norm = s.sqrt();
            if norm > thresh {
                (norm - thresh) / norm
            } else {
                0.0
            }
        })
        .collect();
    let mut out = b.clone();
    for k in 0..n3 {
        for (j, &f) in factors.iter().enumerate() {
            let base = n1 * (j + n2 * k);
            out.as_mut_slice()[base..base + n1]
                .iter_mut()
                .zip(&mask.bits[base..base + n1])
                .filter(|(_, &w)| w)
                .for_each(|(v, _)| *v *= f);
        }
    }
    out
}

/// Masked `l2,1` prox: the observed part of each column is shrunk using the
/// norm of its observed entries, the unobserved part passes through.
pub fn prox_l21_masked(b: &Tensor3, mask: &ObservationMask, thresh: f64) -> Result<Tensor3> {
    mask.check(b)?;
    check_thresh(thresh)?;
    Ok(prox_l21_masked_unchecked(b, mask, thresh))
}

pub(crate) fn prox_l1_masked_unchecked(
    b: &Tensor3,
    mask: &ObservationMask,
    thresh: f64,
) -> Tensor3 {
    let mut out = b.clone();
    out.as_mut_slice()
        .iter_mut()
        .zip(&mask.bits)
        .filter(|(_, &w)| w)
        .for_each(|(v, _)| *v = v.signum() * (v.abs() - thresh).max(0.0));
    out
}

/// Soft-thresholds observed entries; unobserved entries pass through.
pub fn prox_l1_masked(b: &Tensor3, mask: &ObservationMask, thresh: f64) -> Result<Tensor3> {
    mask.check(b)?;
    check_thresh(thresh)?;
    Ok(prox_l1_masked_unchecked(b, mask, thresh))
}

/// Solves the zero-filled missing-data problem. `x_miss` must vanish outside
/// the mask. Lateral slices with no observation are listed in
/// [`SolverResult::undetectable`].
pub fn solve_ortlrr_ewzf(
    x_miss: &Tensor3,
    mask: &ObservationMask,
    spec: &TransformSpec,
    opts: &MissingSolverOptions,
) -> Result<SolverResult> {
    mask.check(x_miss)?;
    if let Some(pos) = x_miss
        .as_slice()
        .iter()
        .zip(&mask.bits)
        .position(|(&v, &w)| !w && v != 0.0)
    {
        return Err(arg_err(format!(
            "x_miss has a nonzero value at unobserved offset {pos}"
        )));
    }
    let mut res = solver::solve_reduced(
        x_miss,
        spec,
        &opts.base,
        DataTerm::Missing {
            mask,
            penalty: opts.penalty,
        },
    )?;
    res.undetectable = mask.unobserved_columns();
    Ok(res)
}
