//! Invertible linear transforms along the third tensor mode.
//!
//! Every transform matrix `L` satisfies `L L^H = L^H L = tau I`. The DFT is
//! unnormalized (`tau = n3`); the DCT-II and the random orthogonal matrix are
//! orthonormal (`tau = 1`).

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use ndarray_linalg::QR;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{arg_err, Result, TlrrError};
use crate::spectral::{Field, SliceTask, Slices};
use crate::tensor::Tensor3;

/// Relative imaginary residue tolerated when mapping back to real tensors.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Dft,
    Dct,
    RandomOrthogonal,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Dft => "dft",
            TransformKind::Dct => "dct",
            TransformKind::RandomOrthogonal => "rom",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TransformKind {
    type Err = TlrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dft" => Ok(TransformKind::Dft),
            "dct" => Ok(TransformKind::Dct),
            "rom" | "random" | "random-orthogonal" => Ok(TransformKind::RandomOrthogonal),
            other => Err(arg_err(format!("unknown transform `{other}`"))),
        }
    }
}

/// Identity of a transform: two specs with equal ids have identical matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransformId {
    pub kind: TransformKind,
    pub n3: usize,
    pub seed: Option<u64>,
}

impl fmt::Display for TransformId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.seed {
            Some(s) => write!(f, "{}({}, seed {})", self.kind, self.n3, s),
            None => write!(f, "{}({})", self.kind, self.n3),
        }
    }
}

#[derive(Clone)]
enum Kernel {
    /// Real matrix applied to the mode-3 unfolding.
    Dense(Array2<f64>),
    Fft {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
}

#[derive(Clone)]
pub struct TransformSpec {
    id: TransformId,
    matrix: Array2<Complex64>,
    tau: f64,
    kernel: Kernel,
}

impl fmt::Debug for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformSpec")
            .field("id", &self.id)
            .field("tau", &self.tau)
            .finish()
    }
}

/// Builds the transform of the given kind and tube length.
///
/// `seed` is required for [`TransformKind::RandomOrthogonal`] and rejected
/// for the deterministic kinds.
pub fn build_transform(kind: TransformKind, n3: usize, seed: Option<u64>) -> Result<TransformSpec> {
    if n3 == 0 {
        return Err(arg_err("tube length n3 must be positive"));
    }
    match (kind, seed) {
        (TransformKind::RandomOrthogonal, None) => {
            return Err(arg_err("random orthogonal transform needs a seed"))
        }
        (TransformKind::Dft | TransformKind::Dct, Some(_)) => {
            return Err(arg_err(format!("{kind} transform takes no seed")))
        }
        _ => {}
    }
    let id = TransformId { kind, n3, seed };
    let spec = match kind {
        TransformKind::Dft => {
            let matrix = Array2::from_shape_fn((n3, n3), |(k, m)| {
                let phase = -2.0 * std::f64::consts::PI * ((k * m) % n3) as f64 / n3 as f64;
                Complex64::from_polar(1.0, phase)
            });
            let mut planner = FftPlanner::new();
            TransformSpec {
                id,
                matrix,
                tau: n3 as f64,
                kernel: Kernel::Fft {
                    forward: planner.plan_fft_forward(n3),
                    inverse: planner.plan_fft_inverse(n3),
                },
            }
        }
        TransformKind::Dct => {
            let real = dct2_matrix(n3);
            real_spec(id, real)
        }
        TransformKind::RandomOrthogonal => {
            let real = random_orthogonal(n3, seed.unwrap())?;
            real_spec(id, real)
        }
    };
    Ok(spec)
}

fn real_spec(id: TransformId, real: Array2<f64>) -> TransformSpec {
    TransformSpec {
        id,
        matrix: real.mapv(|v| Complex64::new(v, 0.0)),
        tau: 1.0,
        kernel: Kernel::Dense(real),
    }
}

/// Orthonormal DCT-II matrix.
fn dct2_matrix(n: usize) -> Array2<f64> {
    let nf = n as f64;
    Array2::from_shape_fn((n, n), |(k, m)| {
        let c = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        c * (std::f64::consts::PI * (2 * m + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    })
}

/// Orthonormal factor of a seeded standard Gaussian matrix, with the sign of
/// each column fixed so that the triangular factor has a positive diagonal.
fn random_orthogonal(n: usize, seed: u64) -> Result<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Array2::<f64>::zeros((n, n));
    for v in g.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
    let (mut q, r) = g.qr()?;
    for c in 0..n {
        if r[[c, c]] < 0.0 {
            q.column_mut(c).mapv_inplace(|v| -v);
        }
    }
    Ok(q)
}

impl TransformSpec {
    pub fn id(&self) -> TransformId {
        self.id
    }

    pub fn kind(&self) -> TransformKind {
        self.id.kind
    }

    pub fn n3(&self) -> usize {
        self.id.n3
    }

    pub fn seed(&self) -> Option<u64> {
        self.id.seed
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The `n3 x n3` transform matrix `L`.
    pub fn matrix(&self) -> ArrayView2<'_, Complex64> {
        self.matrix.view()
    }

    /// True when `L` is real, so the transform domain of a real tensor is real.
    pub fn is_real(&self) -> bool {
        matches!(self.kernel, Kernel::Dense(_))
    }

    /// Slices that must be computed explicitly. For the DFT of real data,
    /// slice `n3 - k` is the conjugate of slice `k` and is filled by mirroring.
    pub(crate) fn slice_tasks<A: Field>(&self) -> Vec<SliceTask> {
        let n3 = self.n3();
        if self.kind() == TransformKind::Dft && A::IS_COMPLEX {
            (0..=n3 / 2)
                .map(|k| SliceTask {
                    k,
                    mirror: (k != 0 && n3 - k != k).then_some(n3 - k),
                })
                .collect()
        } else {
            (0..n3).map(|k| SliceTask { k, mirror: None }).collect()
        }
    }

    fn check_tube(&self, n3: usize) -> Result<()> {
        if n3 != self.n3() {
            return Err(TlrrError::DimensionMismatch(format!(
                "tensor has tube length {n3}, transform {} expects {}",
                self.id,
                self.n3()
            )));
        }
        Ok(())
    }
}

/// A tensor in the transform domain, tagged with the transform that made it.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedTensor {
    pub data: Slices<Complex64>,
    pub spec_id: TransformId,
}

impl TransformedTensor {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dims()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.frobenius()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.data.slice(k)[[i, j]]
    }
}

/// `L(A)`: applies the transform matrix to every mode-3 fiber of `a`.
pub fn apply_transform(a: &Tensor3, spec: &TransformSpec) -> Result<TransformedTensor> {
    Ok(TransformedTensor {
        data: Complex64::forward(spec, a)?,
        spec_id: spec.id(),
    })
}

/// `L^{-1}(A_bar)`; the output must be real up to [`IMAG_RESIDUE_TOL`].
pub fn invert_transform(a: &TransformedTensor, spec: &TransformSpec) -> Result<Tensor3> {
    if a.spec_id != spec.id() {
        return Err(TlrrError::SpecMismatch {
            expected: spec.id().to_string(),
            found: a.spec_id.to_string(),
        });
    }
    Complex64::inverse(spec, &a.data)
}

/// Multiplies the `(n3, n1*n2)` row-major unfolding by `m` on the left.
fn dense_mode3(m: &ArrayView2<'_, f64>, data: &[f64], n3: usize) -> Vec<f64> {
    let cols = if n3 == 0 { 0 } else { data.len() / n3 };
    let unfolded = ArrayView2::from_shape((n3, cols), data).unwrap();
    let out = m.dot(&unfolded);
    match out.is_standard_layout() {
        true => out.into_raw_vec_and_offset().0,
        false => out.iter().copied().collect(),
    }
}

fn fft_tubes(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n3: usize) {
    const BATCH: usize = 256;
    let stride = data.len() / n3;
    let mut buf = vec![Complex64::new(0.0, 0.0); BATCH * n3];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut p0 = 0;
    while p0 < stride {
        let b = BATCH.min(stride - p0);
        let chunk = &mut buf[..b * n3];
        for k in 0..n3 {
            let row = &data[k * stride + p0..k * stride + p0 + b];
            for (t, &v) in row.iter().enumerate() {
                chunk[t * n3 + k] = v;
            }
        }
        fft.process_with_scratch(chunk, &mut scratch);
        for k in 0..n3 {
            let row = &mut data[k * stride + p0..k * stride + p0 + b];
            for (t, v) in row.iter_mut().enumerate() {
                *v = chunk[t * n3 + k];
            }
        }
        p0 += b;
    }
}

fn check_residue(re_sq: f64, im_sq: f64) -> Result<()> {
    let total = (re_sq + im_sq).sqrt();
    if total == 0.0 {
        return Ok(());
    }
    let relative = im_sq.sqrt() / total;
    if relative > IMAG_RESIDUE_TOL {
        return Err(TlrrError::ImaginaryResidue { relative });
    }
    Ok(())
}

impl Field for f64 {
    const IS_COMPLEX: bool = false;

    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }

    fn forward(spec: &TransformSpec, x: &Tensor3) -> Result<Slices<f64>> {
        spec.check_tube(x.n3())?;
        match &spec.kernel {
            Kernel::Dense(m) => Ok(Slices {
                dims: x.dims(),
                data: dense_mode3(&m.view(), x.as_slice(), x.n3()),
            }),
            Kernel::Fft { .. } => Err(arg_err(format!(
                "{} has a complex transform domain",
                spec.id()
            ))),
        }
    }

    fn inverse(spec: &TransformSpec, x: &Slices<f64>) -> Result<Tensor3> {
        spec.check_tube(x.dims.2)?;
        match &spec.kernel {
            Kernel::Dense(m) => {
                let data = dense_mode3(&m.t(), &x.data, x.dims.2);
                let data = match spec.tau {
                    t if t == 1.0 => data,
                    t => data.into_iter().map(|v| v / t).collect(),
                };
                Tensor3::from_vec(x.dims, data)
            }
            Kernel::Fft { .. } => Err(arg_err(format!(
                "{} has a complex transform domain",
                spec.id()
            ))),
        }
    }
}

impl Field for Complex64 {
    const IS_COMPLEX: bool = true;

    fn to_complex(self) -> Complex64 {
        self
    }

    fn forward(spec: &TransformSpec, x: &Tensor3) -> Result<Slices<Complex64>> {
        spec.check_tube(x.n3())?;
        let data = match &spec.kernel {
            Kernel::Dense(m) => dense_mode3(&m.view(), x.as_slice(), x.n3())
                .into_iter()
                .map(|v| Complex64::new(v, 0.0))
                .collect(),
            Kernel::Fft { forward, .. } => {
                let mut data: Vec<Complex64> = x
                    .as_slice()
                    .iter()
                    .map(|&v| Complex64::new(v, 0.0))
                    .collect();
                if !data.is_empty() {
                    fft_tubes(forward, &mut data, x.n3());
                }
                data
            }
        };
        Ok(Slices {
            dims: x.dims(),
            data,
        })
    }

    fn inverse(spec: &TransformSpec, x: &Slices<Complex64>) -> Result<Tensor3> {
        let n3 = x.dims.2;
        spec.check_tube(n3)?;
        let (re, im): (Vec<f64>, Vec<f64>) = match &spec.kernel {
            Kernel::Dense(m) => {
                let re: Vec<f64> = x.data.iter().map(|v| v.re).collect();
                let re = dense_mode3(&m.t(), &re, n3);
                let im = if x.data.iter().any(|v| v.im != 0.0) {
                    let im: Vec<f64> = x.data.iter().map(|v| v.im).collect();
                    dense_mode3(&m.t(), &im, n3)
                } else {
                    Vec::new()
                };
                let tau = spec.tau;
                (
                    re.into_iter().map(|v| v / tau).collect(),
                    im.into_iter().map(|v| v / tau).collect(),
                )
            }
            Kernel::Fft { inverse, .. } => {
                let mut data = x.data.clone();
                if !data.is_empty() {
                    fft_tubes(inverse, &mut data, n3);
                }
                let scale = 1.0 / n3 as f64;
                data.into_iter()
                    .map(|v| (v.re * scale, v.im * scale))
                    .unzip()
            }
        };
        let re_sq: f64 = re.iter().map(|v| v * v).sum();
        let im_sq: f64 = im.iter().map(|v| v * v).sum();
        check_residue(re_sq, im_sq)?;
        Tensor3::from_vec(x.dims, re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gram_defect(spec: &TransformSpec) -> f64 {
        let l = spec.matrix();
        let n = spec.n3();
        let mut worst: f64 = 0.0;
        for (a, b) in [
            (l.to_owned(), l.t().mapv(|v| v.conj())),
            (l.t().mapv(|v| v.conj()), l.to_owned()),
        ] {
            let p = a.dot(&b);
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { spec.tau() } else { 0.0 };
                    acc += (p[[i, j]] - Complex64::new(target, 0.0)).norm_sqr();
                }
            }
            worst = worst.max(acc.sqrt());
        }
        worst
    }

    #[test]
    fn dft_of_length_one_is_identity() {
        let spec = build_transform(TransformKind::Dft, 1, None).unwrap();
        assert_eq!(spec.tau(), 1.0);
        assert_eq!(spec.matrix()[[0, 0]], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn dct4_is_orthonormal() {
        let spec = build_transform(TransformKind::Dct, 4, None).unwrap();
        assert_eq!(spec.tau(), 1.0);
        assert!(gram_defect(&spec) < 1e-12);
    }

    #[test]
    fn dft100_scale() {
        let spec = build_transform(TransformKind::Dft, 100, None).unwrap();
        assert_eq!(spec.tau(), 100.0);
        assert!(gram_defect(&spec) <= 1e-10 * 100.0 * 100.0);
    }

    #[test]
    fn seed_rules() {
        assert!(build_transform(TransformKind::RandomOrthogonal, 4, None).is_err());
        assert!(build_transform(TransformKind::Dct, 4, Some(1)).is_err());
        assert!(build_transform(TransformKind::Dft, 0, None).is_err());
    }

    #[test]
    fn random_orthogonal_is_deterministic() {
        let a = build_transform(TransformKind::RandomOrthogonal, 7, Some(3)).unwrap();
        let b = build_transform(TransformKind::RandomOrthogonal, 7, Some(3)).unwrap();
        let c = build_transform(TransformKind::RandomOrthogonal, 7, Some(4)).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert_ne!(a.matrix(), c.matrix());
        assert!(gram_defect(&a) < 1e-12);
    }

    #[test]
    fn two_point_dft_tube() {
        let spec = build_transform(TransformKind::Dft, 2, None).unwrap();
        let a = Tensor3::from_vec((1, 1, 2), vec![1.0, 2.0]).unwrap();
        let t = apply_transform(&a, &spec).unwrap();
        assert_abs_diff_eq!(t.get(0, 0, 0).re, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(0, 0, 1).re, -1.0, epsilon = 1e-15);
        let back = invert_transform(&t, &spec).unwrap();
        assert_eq!(back.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn spec_mismatch_is_rejected() {
        let dft = build_transform(TransformKind::Dft, 3, None).unwrap();
        let dct = build_transform(TransformKind::Dct, 3, None).unwrap();
        let a = Tensor3::from_fn(2, 2, 3, |i, j, k| (i + j + k) as f64);
        let t = apply_transform(&a, &dft).unwrap();
        assert!(matches!(
            invert_transform(&t, &dct),
            Err(TlrrError::SpecMismatch { .. })
        ));
    }

    #[test]
    fn imaginary_residue_is_an_error() {
        let spec = build_transform(TransformKind::Dct, 2, None).unwrap();
        let mut t =
            apply_transform(&Tensor3::from_fn(1, 1, 2, |_, _, k| k as f64 + 1.0), &spec).unwrap();
        t.data.slice_mut(0)[[0, 0]].im = 0.5;
        assert!(matches!(
            invert_transform(&t, &spec),
            Err(TlrrError::ImaginaryResidue { .. })
        ));
    }

    #[test]
    fn wrong_tube_length() {
        let spec = build_transform(TransformKind::Dct, 3, None).unwrap();
        assert!(apply_transform(&Tensor3::zeros(2, 2, 4), &spec).is_err());
    }
}
