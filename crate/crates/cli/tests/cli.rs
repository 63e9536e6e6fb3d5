use std::path::Path;
use std::process::{Command, Output};

fn ortlrr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ortlrr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ortlrr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 8] = ["--n1", "10", "--n3", "4", "--clusters", "2", "--seeds", "3"];

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let sol = dir.path().join("sol");

    let mut args = vec!["synth", "--out", p(&data)];
    args.extend(SMALL);
    ok(&args);
    for f in ["x.t3b", "l0.t3b", "e0.t3b", "truth.csv"] {
        assert!(data.join(f).exists(), "{f} missing");
    }
    let truth = std::fs::read_to_string(data.join("truth.csv")).unwrap();
    assert_eq!(truth.lines().next(), Some("column,label,outlier"));
    assert_eq!(truth.lines().count(), 1 + 20);

    let x = data.join("x.t3b");
    let mut args = vec![
        "solve",
        "--input",
        p(&x),
        "--out",
        p(&sol),
        "--max-iters",
        "60",
    ];
    args.extend(SMALL);
    let stdout = ok(&args);
    assert!(stdout.contains("iterations"), "{stdout}");

    let (z, e) = (sol.join("z.t3b"), sol.join("e.t3b"));
    let mut args = vec!["cluster", "--z", p(&z), "--e", p(&e)];
    args.extend(SMALL);
    let clusters = ok(&args);
    assert_eq!(clusters.lines().next(), Some("column,outlier,label"));
    assert_eq!(clusters.lines().count(), 1 + 20);

    let mut args = vec!["eval", "--data", p(&data), "--solution", p(&sol)];
    args.extend(SMALL);
    let table = ok(&args);
    assert!(table.contains("rowspace"), "{table}");
    assert!(
        table.lines().any(|l| l.trim_start().starts_with("3 ")),
        "{table}"
    );
}

#[test]
fn exp_reads_config_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "transform = dct\nn1 = 10\nn3 = 4\nclusters = 2\nseeds = 0..2\nmax_iters = 40\nalpha = 40\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    // the flag wins over the file
    let stdout = ok(&[
        "exp",
        "--config",
        p(&cfg),
        "--seeds",
        "5,6",
        "--out",
        p(&out),
    ]);
    assert!(stdout.contains("mean"));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(
        lines[0].starts_with("seed,rank_t,rowspace_err"),
        "{}",
        lines[0]
    );
    assert!(lines[1].starts_with("5,"));
    assert!(lines[2].starts_with("6,"));
    assert!(lines[3].starts_with("mean,"));
    assert!(out.join("metrics.txt").exists());
}

#[test]
fn missing_data_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let mut args = vec![
        "synth",
        "--out",
        p(&data),
        "--delta",
        "0.1",
        "--solver",
        "ewzf-l21",
    ];
    args.extend(SMALL);
    ok(&args);
    let (x, mask) = (data.join("x.t3b"), data.join("mask.t3b"));
    let sol = dir.path().join("sol");
    let mut args = vec![
        "solve",
        "--input",
        p(&x),
        "--mask",
        p(&mask),
        "--solver",
        "ewzf-l1",
        "--out",
        p(&sol),
        "--max-iters",
        "30",
    ];
    args.extend(SMALL);
    ok(&args);
    assert!(sol.join("e.t3b").exists());
}

#[test]
fn prox_check_passes() {
    let stdout = ok(&["prox-check", "--cases", "20"]);
    assert_eq!(stdout.lines().count(), 6);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
}

#[test]
fn bad_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.t3b");
    std::fs::write(&junk, b"nope").unwrap();
    let out = ortlrr(&["solve", "--input", p(&junk), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));

    let out = ortlrr(&["exp", "--alpha", "1", "--lambda", "0.1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = ortlrr(&["exp", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}
