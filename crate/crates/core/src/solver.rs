//! ADMM solver for outlier-robust tensor LRR and its proximal operators.
//!
//! The solver works on the reduced problem with dictionary `D = U_X * S_X`
//! from the skinny t-SVD of `X`, so the coefficient block is `r x n2` instead
//! of `n2 x n2`, and maps back with `Z = V_X * Z'`.

use ndarray::Zip;

use crate::error::{arg_err, dim_err, Result, TlrrError};
use crate::solver_missing::{self, ObservationMask, Penalty};
use crate::spectral::{self, build_slices, Field, Slices};
use crate::tensor::Tensor3;
use crate::tlinalg::{self, mul_ah_b, slice_mul, with_field, DEFAULT_RANK_TOL};
use crate::transforms::{TransformId, TransformKind, TransformSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub beta0: f64,
    pub beta_max: f64,
    pub eps: f64,
    pub max_iters: usize,
}

impl SolverConfig {
    pub const DEFAULT_GAMMA: f64 = 1.1;
    pub const DEFAULT_BETA0: f64 = 1e-5;
    pub const DEFAULT_BETA_MAX: f64 = 1e8;
    pub const DEFAULT_EPS: f64 = 1e-5;
    pub const DEFAULT_MAX_ITERS: usize = 500;

    pub fn new(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            gamma: Self::DEFAULT_GAMMA,
            beta0: Self::DEFAULT_BETA0,
            beta_max: Self::DEFAULT_BETA_MAX,
            eps: Self::DEFAULT_EPS,
            max_iters: Self::DEFAULT_MAX_ITERS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda > 0.0
            && self.lambda.is_finite()
            && self.gamma > 1.0
            && self.beta0 > 0.0
            && self.beta_max >= self.beta0
            && self.eps > 0.0
            && self.max_iters >= 1;
        if ok {
            Ok(())
        } else {
            Err(arg_err(format!("invalid solver config {self:?}")))
        }
    }
}

/// One ADMM iteration: the penalty it ran with and the largest of the
/// stopping quantities after it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationStats {
    pub beta: f64,
    pub max_residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    /// `n2 x n2 x n3` representation tensor.
    pub z_star: Tensor3,
    /// `n1 x n2 x n3` column-sparse residual.
    pub e_star: Tensor3,
    pub iters: usize,
    pub converged: bool,
    pub trace: Vec<IterationStats>,
    /// Lateral slices without any observed entry (missing-data solver only).
    pub undetectable: Vec<usize>,
}

impl SolverResult {
    fn zero(n1: usize, n2: usize, n3: usize) -> Self {
        SolverResult {
            z_star: Tensor3::zeros(n2, n2, n3),
            e_star: Tensor3::zeros(n1, n2, n3),
            iters: 0,
            converged: true,
            trace: Vec::new(),
            undetectable: Vec::new(),
        }
    }
}

fn check_thresh(thresh: f64) -> Result<()> {
    if !(thresh > 0.0) || !thresh.is_finite() {
        return Err(arg_err(format!("threshold must be positive, got {thresh}")));
    }
    Ok(())
}

fn prox_nuclear_in<A: Field>(b: &Tensor3, thresh: f64, spec: &TransformSpec) -> Result<Tensor3> {
    let bb = A::forward(spec, b)?;
    let (n1, n2, _) = bb.dims();
    let out = build_slices(spec, n1, n2, |k| spectral::svt(&bb.slice(k), thresh))?;
    A::inverse(spec, &out)
}

/// Singular value thresholding applied to every transform-domain slice.
pub fn prox_tensor_nuclear(b: &Tensor3, thresh: f64, spec: &TransformSpec) -> Result<Tensor3> {
    check_thresh(thresh)?;
    if b.n3() != spec.n3() {
        return Err(dim_err(format!(
            "tube length {} does not match {}",
            b.n3(),
            spec.id()
        )));
    }
    with_field!(spec, prox_nuclear_in(b, thresh, spec))
}

pub(crate) fn prox_l21_unchecked(b: &Tensor3, thresh: f64) -> Tensor3 {
    let factors: Vec<f64> = b
        .column_sq_norms()
        .into_iter()
        .map(|s| {
            let norm = s.sqrt();
            if norm > thresh {
                (norm - thresh) / norm
            } else {
                0.0
            }
        })
        .collect();
    let mut out = b.clone();
    out.scale_columns(&factors);
    out
}

/// Column shrinkage: `B(:,j,:)` is scaled by `(||B_j|| - thresh) / ||B_j||`,
/// or zeroed when its norm is at most `thresh`.
pub fn prox_l21(b: &Tensor3, thresh: f64) -> Result<Tensor3> {
    check_thresh(thresh)?;
    Ok(prox_l21_unchecked(b, thresh))
}

/// `Q = (D^H * D + I)^{-1}` in the spatial domain, for a fixed dictionary.
#[derive(Clone, Debug)]
pub struct JSolveCache {
    q: Tensor3,
    spec_id: TransformId,
}

impl JSolveCache {
    pub fn new(d: &Tensor3, spec: &TransformSpec) -> Result<Self> {
        fn build<A: Field>(d: &Tensor3, spec: &TransformSpec) -> Result<Tensor3> {
            let db = A::forward(spec, d)?;
            A::inverse(spec, &gram_inverse(spec, &db)?)
        }
        if d.n3() != spec.n3() {
            return Err(dim_err("dictionary tube length does not match transform"));
        }
        Ok(JSolveCache {
            q: with_field!(spec, build(d, spec))?,
            spec_id: spec.id(),
        })
    }

    pub fn q(&self) -> &Tensor3 {
        &self.q
    }
}

/// Per-slice `(D^H D + I)^{-1}`.
fn gram_inverse<A: Field>(spec: &TransformSpec, d: &Slices<A>) -> Result<Slices<A>> {
    let r = d.dims().1;
    build_slices(spec, r, r, |k| {
        let dk = d.slice(k);
        let mut g = mul_ah_b(&dk, &dk);
        for i in 0..r {
            g[[i, i]] += A::one();
        }
        spectral::inv_hpd(&g)
    })
}

/// `Q (P1 + D^H P2)` slice by slice, with `dh = D^H` precomputed.
fn j_update<A: Field>(
    spec: &TransformSpec,
    q: &Slices<A>,
    dh: &Slices<A>,
    p1: &Slices<A>,
    p2: &Slices<A>,
) -> Result<Slices<A>> {
    let (r, n2, _) = p1.dims();
    build_slices(spec, r, n2, |k| {
        let mut rhs = dh.slice(k).dot(&p2.slice(k));
        rhs += &p1.slice(k);
        Ok(q.slice(k).dot(&rhs))
    })
}

/// Closed-form `J = (D^H*D + I)^{-1} * (P1 + D^H*P2)`.
pub fn solve_j_subproblem(
    p1: &Tensor3,
    p2: &Tensor3,
    d: &Tensor3,
    cache: &JSolveCache,
    spec: &TransformSpec,
) -> Result<Tensor3> {
    fn run<A: Field>(
        p1: &Tensor3,
        p2: &Tensor3,
        d: &Tensor3,
        q: &Tensor3,
        spec: &TransformSpec,
    ) -> Result<Tensor3> {
        let db = A::forward(spec, d)?;
        let (n1, r, _) = db.dims();
        let dh = build_slices(spec, r, n1, |k| Ok(spectral::hermitian(&db.slice(k))))?;
        let j = j_update(
            spec,
            &A::forward(spec, q)?,
            &dh,
            &A::forward(spec, p1)?,
            &A::forward(spec, p2)?,
        )?;
        A::inverse(spec, &j)
    }
    if cache.spec_id != spec.id() {
        return Err(TlrrError::SpecMismatch {
            expected: spec.id().to_string(),
            found: cache.spec_id.to_string(),
        });
    }
    let (n1, r, n3) = d.dims();
    if p1.dims() != (r, p1.n2(), n3)
        || p2.dims() != (n1, p1.n2(), n3)
        || cache.q.dims() != (r, r, n3)
        || n3 != spec.n3()
    {
        return Err(dim_err(format!(
            "J subproblem shapes: P1 {:?}, P2 {:?}, D {:?}, Q {:?}",
            p1.dims(),
            p2.dims(),
            d.dims(),
            cache.q.dims()
        )));
    }
    with_field!(spec, run(p1, p2, d, &cache.q, spec))
}

/// How the data enters the constraint.
#[derive(Clone, Copy, Debug)]
pub(crate) enum DataTerm<'a> {
    Full,
    Missing {
        mask: &'a ObservationMask,
        penalty: Penalty,
    },
}

struct AdmmOutput<A> {
    z_bar: Slices<A>,
    e: Tensor3,
    iters: usize,
    converged: bool,
    trace: Vec<IterationStats>,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}

/// ADMM iterations for `min ||Z||_* + lambda ||E||` s.t. `data = D*Z + E`,
/// with `d` the transform-domain dictionary.
fn admm<A: Field>(
    x: &Tensor3,
    d: &Slices<A>,
    spec: &TransformSpec,
    cfg: &SolverConfig,
    term: DataTerm<'_>,
) -> Result<AdmmOutput<A>> {
    let (n1, r, n3) = d.dims();
    let n2 = x.n2();
    let dh = build_slices(spec, r, n1, |k| Ok(spectral::hermitian(&d.slice(k))))?;
    let q = gram_inverse(spec, d)?;

    let mut z_bar = Slices::<A>::zeros(r, n2, n3);
    let mut j_bar = Slices::<A>::zeros(r, n2, n3);
    let mut y1_bar = Slices::<A>::zeros(r, n2, n3);
    let mut z_sp = Tensor3::zeros(r, n2, n3);
    let mut j_sp = Tensor3::zeros(r, n2, n3);
    let mut e = Tensor3::zeros(n1, n2, n3);
    let mut y2 = Tensor3::zeros(n1, n2, n3);
    let mut dj = Tensor3::zeros(n1, n2, n3);
    let mut h = Tensor3::zeros(n1, n2, n3);

    let mut beta = cfg.beta0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;

    while iters < cfg.max_iters {
        iters += 1;
        let inv_beta = 1.0 / beta;
        let ib = A::from_real(inv_beta);

        // H: observed entries pinned to the data, the rest follow the model
        let mut dh_change = 0.0;
        if let DataTerm::Missing { mask, .. } = term {
            let mut h_new = dj.add(&e)?;
            h_new.axpy(-inv_beta, &y2)?;
            for ((v, &obs), &xv) in h_new
                .as_mut_slice()
                .iter_mut()
                .zip(mask.bits())
                .zip(x.as_slice())
            {
                if obs {
                    *v = xv;
                }
            }
            dh_change = h_new.max_abs_diff(&h)?;
            h = h_new;
        }
        let data = match term {
            DataTerm::Full => x,
            DataTerm::Missing { .. } => &h,
        };

        let z_new = build_slices(spec, r, n2, |k| {
            let b = Zip::from(&j_bar.slice(k))
                .and(&y1_bar.slice(k))
                .map_collect(|&jv, &yv| jv - yv * ib);
            spectral::svt(&b.view(), inv_beta)
        })?;

        let mut b2 = data.sub(&dj)?;
        b2.axpy(inv_beta, &y2)?;
        let thresh = cfg.lambda * inv_beta;
        let e_new = match term {
            DataTerm::Full => prox_l21_unchecked(&b2, thresh),
            DataTerm::Missing {
                mask,
                penalty: Penalty::L21,
            } => solver_missing::prox_l21_masked_unchecked(&b2, mask, thresh),
            DataTerm::Missing {
                mask,
                penalty: Penalty::L1,
            } => solver_missing::prox_l1_masked_unchecked(&b2, mask, thresh),
        };

        let p1 = z_new.add_scaled(inv_beta, &y1_bar)?;
        let mut p2 = data.sub(&e_new)?;
        p2.axpy(inv_beta, &y2)?;
        let j_new = j_update(spec, &q, &dh, &p1, &A::forward(spec, &p2)?)?;

        let dj_new = A::inverse(spec, &slice_mul(spec, d, &j_new)?)?;
        let z_sp_new = A::inverse(spec, &z_new)?;
        let j_sp_new = A::inverse(spec, &j_new)?;

        y1_bar.axpy(beta, &z_new.add_scaled(-1.0, &j_new)?);
        let mut primal = data.sub(&dj_new)?;
        primal.axpy(-1.0, &e_new)?;
        y2.axpy(beta, &primal)?;

        let residual = [
            max_abs_diff(z_sp_new.as_slice(), z_sp.as_slice()),
            max_abs_diff(j_sp_new.as_slice(), j_sp.as_slice()),
            e_new.max_abs_diff(&e)?,
            dh_change,
            max_abs_diff(z_sp_new.as_slice(), j_sp_new.as_slice()),
            primal.max_abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        trace.push(IterationStats {
            beta,
            max_residual: residual,
        });

        z_bar = z_new;
        j_bar = j_new;
        z_sp = z_sp_new;
        j_sp = j_sp_new;
        e = e_new;
        dj = dj_new;
        beta = (cfg.gamma * beta).min(cfg.beta_max);

        if residual <= cfg.eps {
            converged = true;
            break;
        }
    }
    Ok(AdmmOutput {
        z_bar,
        e,
        iters,
        converged,
        trace,
    })
}

fn check_input(x: &Tensor3, spec: &TransformSpec, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if !x.is_finite() {
        return Err(TlrrError::NonFinite);
    }
    if x.n3() != spec.n3() {
        return Err(dim_err(format!(
            "tube length {} does not match {}",
            x.n3(),
            spec.id()
        )));
    }
    Ok(())
}

fn reduced_in<A: Field>(
    x: &Tensor3,
    spec: &TransformSpec,
    cfg: &SolverConfig,
    term: DataTerm<'_>,
) -> Result<SolverResult> {
    let xb = A::forward(spec, x)?;
    let svd = tlinalg::skinny_slices(spec, &xb, DEFAULT_RANK_TOL)?;
    let d = svd.us();
    let out = admm(x, &d, spec, cfg, term)?;
    let z_star = A::inverse(spec, &slice_mul(spec, &svd.v, &out.z_bar)?)?;
    Ok(SolverResult {
        z_star,
        e_star: out.e,
        iters: out.iters,
        converged: out.converged,
        trace: out.trace,
        undetectable: Vec::new(),
    })
}

pub(crate) fn solve_reduced(
    x: &Tensor3,
    spec: &TransformSpec,
    cfg: &SolverConfig,
    term: DataTerm<'_>,
) -> Result<SolverResult> {
    check_input(x, spec, cfg)?;
    let (n1, n2, n3) = x.dims();
    if x.is_zero() {
        return Ok(SolverResult::zero(n1, n2, n3));
    }
    with_field!(spec, reduced_in(x, spec, cfg, term))
}

/// Solves `min ||Z||_* + lambda ||E||_{2,1}` s.t. `X = X*Z + E` through the
/// reduced dictionary `U_X * S_X`.
pub fn solve_ortlrr(x: &Tensor3, spec: &TransformSpec, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_reduced(x, spec, cfg, DataTerm::Full)
}

fn full_in<A: Field>(
    x: &Tensor3,
    spec: &TransformSpec,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    let xb = A::forward(spec, x)?;
    let out = admm(x, &xb, spec, cfg, DataTerm::Full)?;
    Ok(SolverResult {
        z_star: A::inverse(spec, &out.z_bar)?,
        e_star: out.e,
        iters: out.iters,
        converged: out.converged,
        trace: out.trace,
        undetectable: Vec::new(),
    })
}

/// The same problem solved with `X` itself as dictionary (`n2 x n2`
/// coefficients). Much slower; used to cross-check the reduced solver.
pub fn solve_ortlrr_unreduced(
    x: &Tensor3,
    spec: &TransformSpec,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    check_input(x, spec, cfg)?;
    let (n1, n2, n3) = x.dims();
    if x.is_zero() {
        return Ok(SolverResult::zero(n1, n2, n3));
    }
    with_field!(spec, full_in(x, spec, cfg))
}

/// `||Z||_* + lambda ||E||_{2,1}`.
pub fn objective(z: &Tensor3, e: &Tensor3, lambda: f64, spec: &TransformSpec) -> Result<f64> {
    Ok(tlinalg::tensor_nuclear_norm(z, spec)? + lambda * tlinalg::norms(e).l21)
}

/// `lambda = alpha / (sqrt(ln max(n1, n2)) * ||X||)` with the tensor spectral norm.
pub fn lambda_from_alpha(x: &Tensor3, spec: &TransformSpec, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(arg_err("alpha must be positive"));
    }
    let n = x.n1().max(x.n2());
    if n < 2 {
        return Err(arg_err("lambda scaling needs max(n1, n2) >= 2"));
    }
    let norm = tlinalg::tensor_spectral_norm(x, spec)?;
    if norm == 0.0 {
        return Err(arg_err("lambda scaling is undefined for a zero tensor"));
    }
    Ok(alpha / ((n as f64).ln().sqrt() * norm))
}

/// Workload whose default `alpha` is being asked for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Workload {
    Recovery,
    Missing,
    Clustering,
}

/// Default `alpha` per transform and workload.
pub fn default_alpha(kind: TransformKind, workload: Workload) -> f64 {
    match (workload, kind) {
        (Workload::Recovery, TransformKind::Dft) => 4.0,
        (Workload::Recovery, _) => 40.0,
        (Workload::Missing, TransformKind::Dft) => 2.0,
        (Workload::Missing, _) => 30.0,
        (Workload::Clustering, TransformKind::Dft) => 1.0,
        (Workload::Clustering, _) => 100.0,
    }
}
