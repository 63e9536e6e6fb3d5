use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tlrr_core::checks;
use tlrr_core::experiment::{
    evaluate, mask_seed, resolve_lambda, run_experiment, run_solver, ExperimentConfig,
    MetricsRecord, Truth,
};
use tlrr_core::io::{read_tensor, write_tensor};
use tlrr_core::pipeline::{build_affinity, detect_outliers, outlier_scores, spectral_cluster};
use tlrr_core::solver::SolverConfig;
use tlrr_core::solver_missing::ObservationMask;
use tlrr_core::synth::{apply_missing_mask, generate_instance, SyntheticParams};

#[derive(Parser)]
#[command(
    name = "ortlrr",
    version,
    about = "Outlier-robust tensor low-rank representation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every stage. Each flag overrides the key of the same
/// name in `--config`.
#[derive(Args, Clone, Debug, Default)]
struct Settings {
    /// Flat `key = value` file
    #[arg(long)]
    config: Option<PathBuf>,
    /// dft | dct | rom
    #[arg(long)]
    transform: Option<String>,
    #[arg(long)]
    transform_seed: Option<String>,
    #[arg(long)]
    n1: Option<String>,
    #[arg(long)]
    n3: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// ortlrr | ewzf-l21 | ewzf-l1
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    clusters: Option<String>,
    /// `0..5` or `1,4,7`
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Settings {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)
                .with_context(|| format!("reading config {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        let pairs = [
            ("transform", &self.transform),
            ("transform_seed", &self.transform_seed),
            ("n1", &self.n1),
            ("n3", &self.n3),
            ("rho", &self.rho),
            ("alpha", &self.alpha),
            ("lambda", &self.lambda),
            ("delta", &self.delta),
            ("solver", &self.solver),
            ("clusters", &self.clusters),
            ("seeds", &self.seeds),
            ("max_iters", &self.max_iters),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        // a flag-provided lambda replaces a config-file alpha and vice versa
        if self.lambda.is_some() && self.alpha.is_none() {
            cfg.alpha = None;
        }
        if self.alpha.is_some() && self.lambda.is_none() {
            cfg.lambda = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
        match &cfg.out {
            Some(p) => {
                fs::create_dir_all(p)?;
                Ok(p)
            }
            None => bail!("--out is required"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance (first seed) into --out
    Synth(Settings),
    /// Solve a tensor file, writing z.t3b and e.t3b into --out
    Solve {
        #[arg(long)]
        input: PathBuf,
        /// Observation mask (1 = observed) for the ewzf solvers
        #[arg(long)]
        mask: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Detect outliers from E and cluster the rest from Z
    Cluster {
        #[arg(long)]
        z: PathBuf,
        #[arg(long)]
        e: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Score a solution directory against a synth directory
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// End-to-end runs over every seed
    Exp(Settings),
    /// Compare operators with slow reference implementations
    ProxCheck {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn first_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seeds[0]
}

fn write_truth(path: &Path, labels: &[usize], outlier: &[bool]) -> Result<()> {
    let mut s = String::from("column,label,outlier\n");
    for (j, (l, o)) in labels.iter().zip(outlier).enumerate() {
        s.push_str(&format!("{j},{l},{}\n", u8::from(*o)));
    }
    fs::write(path, s)?;
    Ok(())
}

fn read_truth(path: &Path) -> Result<(Vec<usize>, Vec<usize>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut labels, mut theta) = (Vec::new(), Vec::new());
    for (no, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            bail!(
                "{}:{}: expected column,label,outlier",
                path.display(),
                no + 1
            );
        }
        let j: usize = fields[0].parse()?;
        if j != labels.len() {
            bail!(
                "{}:{}: columns must be listed in order",
                path.display(),
                no + 1
            );
        }
        labels.push(fields[1].parse()?);
        if fields[2] == "1" {
            theta.push(j);
        }
    }
    Ok((labels, theta))
}

fn synth(settings: &Settings) -> Result<()> {
    let cfg = settings.resolve()?;
    let dir = Settings::out_dir(&cfg)?;
    let seed = first_seed(&cfg);
    let spec = cfg.spec_for_seed(cfg.n3, seed)?;
    let params = SyntheticParams::standard(cfg.n1, cfg.n3, cfg.clusters, cfg.rho, seed);
    let inst = generate_instance(&params, &spec)?;
    let x = if cfg.delta > 0.0 {
        let (xm, mask) = apply_missing_mask(&inst.x, cfg.delta, mask_seed(seed))?;
        write_tensor(&mask.to_tensor(), dir.join("mask.t3b"))?;
        xm
    } else {
        inst.x.clone()
    };
    write_tensor(&x, dir.join("x.t3b"))?;
    write_tensor(&inst.l0, dir.join("l0.t3b"))?;
    write_tensor(&inst.e0, dir.join("e0.t3b"))?;
    write_truth(&dir.join("truth.csv"), &inst.labels, &inst.is_outlier())?;
    println!(
        "wrote {:?} instance with {} outlier columns to {}",
        x.dims(),
        inst.theta0.len(),
        dir.display()
    );
    Ok(())
}

fn solve(input: &Path, mask: Option<&Path>, settings: &Settings) -> Result<()> {
    let cfg = settings.resolve()?;
    let dir = Settings::out_dir(&cfg)?;
    let x = read_tensor(input).with_context(|| format!("reading {}", input.display()))?;
    let mask = mask
        .map(|p| read_tensor(p).map(|w| ObservationMask::from_tensor(&w)))
        .transpose()?;
    let spec = cfg.spec_for_seed(x.n3(), first_seed(&cfg))?;
    let lambda = resolve_lambda(&cfg, &x, &spec)?;
    let solver_cfg = SolverConfig {
        max_iters: cfg.max_iters,
        ..SolverConfig::new(lambda)
    };
    let res = run_solver(&x, mask.as_ref(), &spec, cfg.solver, &solver_cfg)?;
    write_tensor(&res.z_star, dir.join("z.t3b"))?;
    write_tensor(&res.e_star, dir.join("e.t3b"))?;
    println!(
        "{} on {:?}: lambda {lambda:.6e}, {} iterations, converged {}",
        cfg.solver,
        x.dims(),
        res.iters,
        res.converged
    );
    if !res.undetectable.is_empty() {
        println!("columns with no observed entry: {:?}", res.undetectable);
    }
    Ok(())
}

fn cluster(z: &Path, e: &Path, settings: &Settings) -> Result<()> {
    let cfg = settings.resolve()?;
    let z = read_tensor(z)?;
    let e = read_tensor(e)?;
    let part = detect_outliers(&outlier_scores(&e))?;
    let mut labels: Vec<Option<usize>> = vec![None; e.n2()];
    if part.inliers.len() >= cfg.clusters {
        let w = build_affinity(&z, &part.inliers)?;
        let pred = spectral_cluster(&w, cfg.clusters, first_seed(&cfg))?;
        for (&j, &l) in part.inliers.iter().zip(&pred) {
            labels[j] = Some(l);
        }
    }
    let mut s = String::from("column,outlier,label\n");
    for (j, l) in labels.iter().enumerate() {
        let label = l.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{j},{},{label}\n", u8::from(l.is_none())));
    }
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("clusters.csv"), s)?;
        }
        None => print!("{s}"),
    }
    eprintln!(
        "{} outliers detected: {:?}",
        part.outliers.len(),
        part.outliers
    );
    Ok(())
}

fn eval(data: &Path, solution: &Path, settings: &Settings) -> Result<()> {
    let cfg = settings.resolve()?;
    let x = read_tensor(data.join("x.t3b"))?;
    let l0 = read_tensor(data.join("l0.t3b"))?;
    let (labels, theta0) = read_truth(&data.join("truth.csv"))?;
    let res = tlrr_core::solver::SolverResult {
        z_star: read_tensor(solution.join("z.t3b"))?,
        e_star: read_tensor(solution.join("e.t3b"))?,
        iters: 0,
        converged: true,
        trace: Vec::new(),
        undetectable: Vec::new(),
    };
    let seed = first_seed(&cfg);
    let spec = cfg.spec_for_seed(x.n3(), seed)?;
    let truth = Truth {
        l0: &l0,
        theta0: &theta0,
        labels: &labels,
    };
    let row = evaluate(&x, &res, &truth, &spec, cfg.clusters, seed)?;
    print!("{}", MetricsRecord::from_rows(vec![row]).table());
    Ok(())
}

fn exp(settings: &Settings) -> Result<()> {
    let cfg = settings.resolve()?;
    let record = run_experiment(&cfg)?;
    print!("{}", record.table());
    Ok(())
}

fn prox_check(cases: usize, seed: u64) -> Result<bool> {
    let mut ok = true;
    for o in checks::run_all(cases, seed)? {
        let verdict = if o.passed() { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {:<36} cases {:>4}  worst {:.3e}  tol {:.0e}",
            o.name, o.cases, o.worst, o.tol
        );
        ok &= o.passed();
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Synth(s) => synth(&s)?,
        Command::Solve {
            input,
            mask,
            settings,
        } => solve(&input, mask.as_deref(), &settings)?,
        Command::Cluster { z, e, settings } => cluster(&z, &e, &settings)?,
        Command::Eval {
            data,
            solution,
            settings,
        } => eval(&data, &solution, &settings)?,
        Command::Exp(s) => exp(&s)?,
        Command::ProxCheck { cases, seed } => return prox_check(cases, seed),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
