//! Synthetic recovery run: `cargo run --release --example recovery -- dft 60 0.2 0,1`

use tlrr_core::experiment::{parse_seeds, run_experiment, ExperimentConfig};

fn main() -> tlrr_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = ExperimentConfig::default();
    if let Some(t) = args.first() {
        cfg.set("transform", t)?;
    }
    if let Some(n1) = args.get(1) {
        cfg.set("n1", n1)?;
    }
    if let Some(rho) = args.get(2) {
        cfg.set("rho", rho)?;
    }
    if let Some(seeds) = args.get(3) {
        cfg.seeds = parse_seeds(seeds)?;
    }
    let record = run_experiment(&cfg)?;
    print!("{}", record.table());
    Ok(())
}
