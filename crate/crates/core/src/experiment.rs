//! End-to-end runs: generate or load data, solve, detect outliers, cluster,
//! and score every seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::error::{arg_err, Result, TlrrError};
use crate::io;
use crate::pipeline::{
    build_affinity, detect_outliers, eval_outlier_auc, outlier_scores, rowspace_error,
    score_detected_clustering, spectral_cluster, support_distance,
};
use crate::solver::{
    default_alpha, lambda_from_alpha, solve_ortlrr, SolverConfig, SolverResult, Workload,
};
use crate::solver_missing::{solve_ortlrr_ewzf, MissingSolverOptions, ObservationMask, Penalty};
use crate::synth::{apply_missing_mask, generate_instance, SyntheticParams};
use crate::tensor::Tensor3;
use crate::tlinalg::{t_product, t_svd_skinny, tubal_rank, DEFAULT_RANK_TOL};
use crate::transforms::{build_transform, TransformKind, TransformSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverChoice {
    Ortlrr,
    EwzfL21,
    EwzfL1,
}

impl FromStr for SolverChoice {
    type Err = TlrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ortlrr" => Ok(SolverChoice::Ortlrr),
            "ewzf-l21" | "ewzf" => Ok(SolverChoice::EwzfL21),
            "ewzf-l1" => Ok(SolverChoice::EwzfL1),
            other => Err(arg_err(format!("unknown solver {other:?}"))),
        }
    }
}

impl std::fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverChoice::Ortlrr => "ortlrr",
            SolverChoice::EwzfL21 => "ewzf-l21",
            SolverChoice::EwzfL1 => "ewzf-l1",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub transform: TransformKind,
    /// Seed of the random orthogonal transform; defaults to the instance seed.
    pub transform_seed: Option<u64>,
    pub n1: usize,
    pub n3: usize,
    pub clusters: usize,
    pub rho: f64,
    /// Tensor file to use instead of synthetic data (no ground truth).
    pub input: Option<PathBuf>,
    pub solver: SolverChoice,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub delta: f64,
    pub seeds: Vec<u64>,
    pub max_iters: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            transform: TransformKind::Dft,
            transform_seed: None,
            n1: 60,
            n3: 100,
            clusters: 5,
            rho: 0.2,
            input: None,
            solver: SolverChoice::Ortlrr,
            alpha: None,
            lambda: None,
            delta: 0.0,
            seeds: vec![0],
            max_iters: SolverConfig::DEFAULT_MAX_ITERS,
            out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| TlrrError::Config(format!("bad value {value:?} for {key}")))
}

/// `"1,2,5"` or `"0..5"` (end exclusive).
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = value.split_once("..") {
        let (a, b): (u64, u64) = (parse("seeds", a.trim())?, parse("seeds", b.trim())?);
        return Ok((a..b).collect());
    }
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse("seeds", s.trim()))
        .collect()
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "transform" => self.transform = value.parse()?,
            "transform_seed" => self.transform_seed = Some(parse(key, value)?),
            "n1" => self.n1 = parse(key, value)?,
            "n3" => self.n3 = parse(key, value)?,
            "clusters" => self.clusters = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            "solver" => self.solver = value.parse()?,
            "alpha" => self.alpha = Some(parse(key, value)?),
            "lambda" => self.lambda = Some(parse(key, value)?),
            "delta" => self.delta = parse(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(TlrrError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses flat `key = value` lines; `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                TlrrError::Config(format!("line {}: expected key = value", no + 1))
            })?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_some() && self.lambda.is_some() {
            return Err(TlrrError::Config("set alpha or lambda, not both".into()));
        }
        if self.seeds.is_empty() {
            return Err(TlrrError::Config("at least one seed is required".into()));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(TlrrError::Config(format!(
                "delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if self.delta > 0.0 && self.solver == SolverChoice::Ortlrr {
            return Err(TlrrError::Config(
                "missing entries need an ewzf solver".into(),
            ));
        }
        if self.clusters == 0 {
            return Err(TlrrError::Config("clusters must be positive".into()));
        }
        Ok(())
    }

    pub fn workload(&self) -> Workload {
        if self.delta > 0.0 {
            Workload::Missing
        } else {
            Workload::Recovery
        }
    }

    pub fn spec_for_seed(&self, n3: usize, seed: u64) -> Result<TransformSpec> {
        let tseed = match self.transform {
            TransformKind::RandomOrthogonal => Some(self.transform_seed.unwrap_or(seed)),
            _ => None,
        };
        build_transform(self.transform, n3, tseed)
    }
}

/// Metrics of one seed, or their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    /// Seed as text, or `mean`.
    pub tag: String,
    pub rank_t: f64,
    pub rowspace_err: f64,
    pub inlier_recon_err: f64,
    pub support_dist: f64,
    pub auc: f64,
    pub acc: f64,
    pub nmi: f64,
    pub pur: f64,
    pub iters: f64,
    pub wall_time: f64,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "seed",
    "rank_t",
    "rowspace_err",
    "inlier_recon_err",
    "support_dist",
    "auc",
    "acc",
    "nmi",
    "pur",
    "iters",
    "wall_time",
];

impl MetricsRow {
    fn values(&self) -> [f64; 10] {
        [
            self.rank_t,
            self.rowspace_err,
            self.inlier_recon_err,
            self.support_dist,
            self.auc,
            self.acc,
            self.nmi,
            self.pur,
            self.iters,
            self.wall_time,
        ]
    }

    fn from_values(tag: String, v: [f64; 10]) -> Self {
        MetricsRow {
            tag,
            rank_t: v[0],
            rowspace_err: v[1],
            inlier_recon_err: v[2],
            support_dist: v[3],
            auc: v[4],
            acc: v[5],
            nmi: v[6],
            pur: v[7],
            iters: v[8],
            wall_time: v[9],
        }
    }

    pub fn csv_record(&self) -> Vec<String> {
        std::iter::once(self.tag.clone())
            .chain(self.values().iter().map(|v| format!("{v:e}")))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub rows: Vec<MetricsRow>,
    pub mean: MetricsRow,
}

impl MetricsRecord {
    pub fn from_rows(rows: Vec<MetricsRow>) -> Self {
        let n = rows.len() as f64;
        let mut acc = [0.0; 10];
        for r in &rows {
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v;
            }
        }
        let mean = MetricsRow::from_values("mean".into(), acc.map(|a| a / n));
        MetricsRecord { rows, mean }
    }

    /// Fixed-width text table of all rows and the mean.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:>11} {:>11} {:>5} {:>6} {:>6} {:>6} {:>6} {:>5} {:>8}",
            "seed",
            "rank",
            "rowspace",
            "recon",
            "dist",
            "auc",
            "acc",
            "nmi",
            "pur",
            "iters",
            "time[s]"
        );
        for r in self.rows.iter().chain(std::iter::once(&self.mean)) {
            let _ = writeln!(
                s,
                "{:>6} {:>6.1} {:>11.3e} {:>11.3e} {:>5.1} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>5.0} {:>8.2}",
                r.tag,
                r.rank_t,
                r.rowspace_err,
                r.inlier_recon_err,
                r.support_dist,
                r.auc,
                r.acc,
                r.nmi,
                r.pur,
                r.iters,
                r.wall_time
            );
        }
        s
    }
}

/// Solves `x` with the configured solver. `mask` is required for the
/// missing-data solvers; without one every entry counts as observed.
pub fn run_solver(
    x: &Tensor3,
    mask: Option<&ObservationMask>,
    spec: &TransformSpec,
    choice: SolverChoice,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    match choice {
        SolverChoice::Ortlrr => solve_ortlrr(x, spec, cfg),
        SolverChoice::EwzfL21 | SolverChoice::EwzfL1 => {
            let full;
            let mask = match mask {
                Some(m) => m,
                None => {
                    full = ObservationMask::full(x.dims());
                    &full
                }
            };
            let penalty = if choice == SolverChoice::EwzfL1 {
                Penalty::L1
            } else {
                Penalty::L21
            };
            solve_ortlrr_ewzf(
                x,
                mask,
                spec,
                &MissingSolverOptions {
                    penalty,
                    base: *cfg,
                },
            )
        }
    }
}

/// Ground truth for scoring a solve.
pub struct Truth<'a> {
    pub l0: &'a Tensor3,
    pub theta0: &'a [usize],
    pub labels: &'a [usize],
}

/// Scores one solve against ground truth.
pub fn evaluate(
    x: &Tensor3,
    res: &SolverResult,
    truth: &Truth<'_>,
    spec: &TransformSpec,
    clusters: usize,
    seed: u64,
) -> Result<MetricsRow> {
    let n2 = x.n2();
    let mut is_outlier = vec![false; n2];
    for &j in truth.theta0 {
        is_outlier[j] = true;
    }
    let keep: Vec<bool> = is_outlier.iter().map(|&o| !o).collect();

    let x_rec = t_product(x, &res.z_star, spec)?;
    let rec_in = x_rec.mask_columns(&keep);
    let l0_in = truth.l0.mask_columns(&keep);
    let inlier_recon_err = rec_in.rel_error(&l0_in)?;
    let rank_t = tubal_rank(&rec_in, spec, DEFAULT_RANK_TOL)? as f64;
    let v0 = t_svd_skinny(truth.l0, spec, DEFAULT_RANK_TOL)?.v;
    let rowspace_err = rowspace_error(&v0, &res.z_star, spec)?;

    let scores = outlier_scores(&res.e_star);
    let part = detect_outliers(&scores)?;
    let support_dist = support_distance(truth.theta0, &part.outliers, n2)? as f64;
    let auc = eval_outlier_auc(&scores, &is_outlier).unwrap_or(f64::NAN);

    let (acc, nmi, pur) = if part.inliers.len() >= clusters {
        let w = build_affinity(&res.z_star, &part.inliers)?;
        let pred = spectral_cluster(&w, clusters, seed)?;
        let s = score_detected_clustering(&part.inliers, &pred, truth.labels, &is_outlier)?;
        (s.acc, s.nmi, s.pur)
    } else {
        (0.0, 0.0, 0.0)
    };

    Ok(MetricsRow {
        tag: seed.to_string(),
        rank_t,
        rowspace_err,
        inlier_recon_err,
        support_dist,
        auc,
        acc,
        nmi,
        pur,
        iters: res.iters as f64,
        wall_time: 0.0,
    })
}

/// Seed of the missing-entry mask drawn for instance `seed`.
pub fn mask_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_0f_0b5e_77ed
}

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<MetricsRow> {
    if let Some(path) = &cfg.input {
        let x = io::read_tensor(path)?;
        let spec = cfg.spec_for_seed(x.n3(), seed)?;
        let (x, mask) = if cfg.delta > 0.0 {
            let (xm, m) = apply_missing_mask(&x, cfg.delta, mask_seed(seed))?;
            (xm, Some(m))
        } else {
            (x, None)
        };
        let lambda = resolve_lambda(cfg, &x, &spec)?;
        let start = Instant::now();
        let res = run_solver(
            &x,
            mask.as_ref(),
            &spec,
            cfg.solver,
            &solver_config(cfg, lambda),
        )?;
        let wall_time = start.elapsed().as_secs_f64();
        let x_rec = t_product(&x, &res.z_star, &spec)?;
        let part = detect_outliers(&outlier_scores(&res.e_star))?;
        return Ok(MetricsRow {
            tag: seed.to_string(),
            rank_t: tubal_rank(
                &x_rec.mask_columns(&inlier_flags(x.n2(), &part.outliers)),
                &spec,
                DEFAULT_RANK_TOL,
            )? as f64,
            rowspace_err: f64::NAN,
            inlier_recon_err: f64::NAN,
            support_dist: f64::NAN,
            auc: f64::NAN,
            acc: f64::NAN,
            nmi: f64::NAN,
            pur: f64::NAN,
            iters: res.iters as f64,
            wall_time,
        });
    }

    let spec = cfg.spec_for_seed(cfg.n3, seed)?;
    let params = SyntheticParams::standard(cfg.n1, cfg.n3, cfg.clusters, cfg.rho, seed);
    let inst = generate_instance(&params, &spec)?;
    let (x, mask) = if cfg.delta > 0.0 {
        let (xm, m) = apply_missing_mask(&inst.x, cfg.delta, mask_seed(seed))?;
        (xm, Some(m))
    } else {
        (inst.x.clone(), None)
    };
    let lambda = resolve_lambda(cfg, &x, &spec)?;
    let start = Instant::now();
    let res = run_solver(
        &x,
        mask.as_ref(),
        &spec,
        cfg.solver,
        &solver_config(cfg, lambda),
    )?;
    let wall_time = start.elapsed().as_secs_f64();
    let truth = Truth {
        l0: &inst.l0,
        theta0: &inst.theta0,
        labels: &inst.labels,
    };
    let mut row = evaluate(&x, &res, &truth, &spec, cfg.clusters, seed)?;
    row.wall_time = wall_time;
    Ok(row)
}

fn inlier_flags(n2: usize, outliers: &[usize]) -> Vec<bool> {
    let mut keep = vec![true; n2];
    for &j in outliers {
        keep[j] = false;
    }
    keep
}

fn solver_config(cfg: &ExperimentConfig, lambda: f64) -> SolverConfig {
    SolverConfig {
        max_iters: cfg.max_iters,
        ..SolverConfig::new(lambda)
    }
}

/// Explicit `lambda`, or the alpha scaling with the configured or default alpha.
pub fn resolve_lambda(cfg: &ExperimentConfig, x: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    match cfg.lambda {
        Some(l) => Ok(l),
        None => {
            let alpha = cfg
                .alpha
                .unwrap_or_else(|| default_alpha(cfg.transform, cfg.workload()));
            lambda_from_alpha(x, spec, alpha)
        }
    }
}

/// Runs every seed in order. With `out` set, `metrics.csv` is written there
/// and each row is flushed as soon as it is computed, so a failing seed
/// leaves the earlier rows on disk.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsRecord> {
    cfg.validate()?;
    let mut writer = match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut w = csv::Writer::from_path(dir.join("metrics.csv")).map_err(csv_err)?;
            w.write_record(CSV_COLUMNS).map_err(csv_err)?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let mut rows = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let row = run_seed(cfg, seed)?;
        if let Some(w) = writer.as_mut() {
            w.write_record(row.csv_record()).map_err(csv_err)?;
            w.flush()?;
        }
        rows.push(row);
    }
    let record = MetricsRecord::from_rows(rows);
    if let Some(w) = writer.as_mut() {
        w.write_record(record.mean.csv_record()).map_err(csv_err)?;
        w.flush()?;
    }
    if let Some(dir) = &cfg.out {
        std::fs::write(dir.join("metrics.txt"), record.table())?;
    }
    Ok(record)
}

fn csv_err(e: csv::Error) -> TlrrError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => TlrrError::Io(io),
        other => TlrrError::Config(format!("csv: {other:?}")),
    }
}
