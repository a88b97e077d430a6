//! End-to-end checks of the CLI contract: record counts, output schemas,
//! determinism, and failure modes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tensor-descent"))
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let out = bin()
        .args(args)
        .args(["--out-dir", dir.to_str().unwrap()])
        .output()
        .expect("spawn");
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn run_writes_expected_record_count() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "run",
            "--problem",
            "power4-n10",
            "--algo",
            "catd",
            "--p",
            "3",
            "--iters",
            "50",
            "--name",
            "fifty",
        ],
        dir.path(),
    );
    let csv = std::fs::read_to_string(dir.path().join("fifty.trace.csv")).unwrap();
    // header + 50 records
    assert_eq!(csv.lines().count(), 51);
}

#[test]
fn combination_summary_has_counter_keys() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "run",
            "--problem",
            "split-p2-k100-n6",
            "--algo",
            "combination",
            "--p",
            "2",
            "--restarts",
            "1",
            "--name",
            "split",
        ],
        dir.path(),
    );
    let json = std::fs::read_to_string(dir.path().join("split.summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(parsed["n_f"].as_u64().unwrap() > 0);
    assert!(parsed["n_g"].as_u64().unwrap() > 0);
}

#[test]
fn same_seed_gives_byte_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        run_ok(
            &[
                "run",
                "--problem",
                "logistic-n5-m12",
                "--algo",
                "catd",
                "--p",
                "2",
                "--iters",
                "8",
                "--seed",
                "7",
                "--name",
                name,
            ],
            dir.path(),
        );
    }
    let a = std::fs::read(dir.path().join("a.trace.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.trace.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unknown_problem_fails_with_diagnostic() {
    let out = bin()
        .args(["run", "--problem", "nope-n3", "--algo", "catd"])
        .output()
        .expect("spawn");
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nope-n3"), "stderr: {stderr}");
}

#[test]
fn report_reads_back_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "run",
            "--problem",
            "power2-n10",
            "--algo",
            "catd",
            "--p",
            "2",
            "--h",
            "1.0",
            "--iters",
            "40",
            "--name",
            "rep",
        ],
        dir.path(),
    );
    let trace = dir.path().join("rep.trace.csv");
    let out = bin()
        .args([
            "report",
            "--trace",
            trace.to_str().unwrap(),
            "--tail",
            "1.0",
        ])
        .output()
        .expect("spawn");
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("40 records"), "stdout: {stdout}");
    assert!(stdout.contains("slope"), "stdout: {stdout}");
}

#[test]
fn sweep_expands_kappa_values() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "sweep",
            "--problem",
            "split-p2-k{kappa}-n5",
            "--algo",
            "combination",
            "--p",
            "2",
            "--restarts",
            "1",
            "--kappa",
            "10,100",
            "--name",
            "sw",
        ],
        dir.path(),
    );
    assert!(dir.path().join("sw-k10.trace.csv").exists());
    assert!(dir.path().join("sw-k100.trace.csv").exists());
}

#[test]
fn check_derivatives_passes() {
    let out = bin().args(["check-derivatives"]).output().expect("spawn");
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(
        &cfg_path,
        "problem = \"quad-n6\"\nalgo = \"catd\"\np = 2\nh = 1.0\niters = 30\nname = \"cfgrun\"\n",
    )
    .unwrap();
    run_ok(
        &[
            "run",
            "--config",
            cfg_path.to_str().unwrap(),
            "--iters",
            "12",
        ],
        dir.path(),
    );
    let csv = std::fs::read_to_string(dir.path().join("cfgrun.trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13, "flag must override config iters");
}
