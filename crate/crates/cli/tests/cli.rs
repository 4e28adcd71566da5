use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smallball"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

/// Rows of a CSV output, skipping `#` lines and the header.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (header, rows) = csv_rows(text);
    let j = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

fn square_spectrum(dir: &Path) -> PathBuf {
    write(
        dir,
        "spectrum.json",
        r#"{"family": "polynomial", "beta": 2}"#,
    )
}

#[test]
fn estimate_log_values_are_monotone() {
    let dir = TempDir::new().unwrap();
    let sp = square_spectrum(dir.path());
    let out = run(&["estimate", "--spectrum", sp.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let eps = column(&text, "epsilon");
    let logs = column(&text, "log_value");
    assert_eq!(eps.len(), 4);
    assert!(eps.windows(2).all(|w| w[1] < w[0]));
    assert!(logs.windows(2).all(|w| w[1] < w[0]), "{logs:?}");
    assert!(text.starts_with(&format!("# smallball {}\n", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn oracle_output_is_reproducible_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let sp = square_spectrum(dir.path());
    let cfg = write(
        dir.path(),
        "config.json",
        r#"{"epsilon_grid": [0.3, 0.5], "oracle": {"method": "mc-tilted", "terms": 200, "samples": 20000}}"#,
    );
    let mut files = Vec::new();
    for (k, threads) in ["1", "2", "1"].iter().enumerate() {
        let out = dir.path().join(format!("o{k}.csv"));
        let status = run(&[
            "oracle",
            "--spectrum",
            sp.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "11",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ])
        .status;
        assert!(status.success());
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn gamma_check_without_rho_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let sp = square_spectrum(dir.path());
    let out = run(&["gamma-check", "--spectrum", sp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
}

#[test]
fn stochastic_oracle_needs_a_seed() {
    let dir = TempDir::new().unwrap();
    let sp = square_spectrum(dir.path());
    assert_eq!(
        run(&["oracle", "--spectrum", sp.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn compute_errors_exit_3_with_the_module_message() {
    let dir = TempDir::new().unwrap();
    let sp = square_spectrum(dir.path());
    let cfg = write(dir.path(), "c.json", r#"{"epsilon_grid": [5.0]}"#);
    let out = run(&[
        "invert",
        "--spectrum",
        sp.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon = 5 outside"));
}

#[test]
fn bad_inputs_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let sp = square_spectrum(dir.path());
    let unsorted = write(dir.path(), "u.json", r#"{"epsilon_grid": [0.1, 0.3, 0.2]}"#);
    let unknown = write(dir.path(), "k.json", r#"{"epsilon": [0.1]}"#);
    let bad_spec = write(
        dir.path(),
        "b.json",
        r#"{"family": "polynomial", "beta": 0.5}"#,
    );
    for cfg in [&unsorted, &unknown] {
        let out = run(&[
            "estimate",
            "--spectrum",
            sp.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(2));
    }
    assert_eq!(
        run(&["mu", "--spectrum", bad_spec.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["mu"]).status.code(), Some(2));
    assert_eq!(
        run(&["mu", "--config", "/nonexistent/c.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn json_output_embeds_config_and_version() {
    let dir = TempDir::new().unwrap();
    let sp = square_spectrum(dir.path());
    let out = run(&["mu", "--spectrum", sp.to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(lines[0]["config"]["spectrum"]["beta"], 2.0);
    assert_eq!(
        lines[0]["config"]["theta_grid"].as_array().unwrap().len(),
        7
    );
    assert_eq!(lines.len(), 8);
    let theta = lines[1]["theta"].as_f64().unwrap();
    assert_eq!(theta, 1e4);
    assert!(lines[1]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn gamma_check_passes_for_the_saddlepoint_estimate() {
    let dir = TempDir::new().unwrap();
    let sp = square_spectrum(dir.path());
    let cfg = write(dir.path(), "g.json", r#"{"rho": {"kind": "inverted-mu"}}"#);
    let out = run(&[
        "gamma-check",
        "--spectrum",
        sp.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text
        .lines()
        .any(|l| l.starts_with("# summary: {\"verdict\":\"pass\"")));
    assert_eq!(column(&text, "ratio").len(), 9);
}

#[test]
fn remaining_commands_run() {
    let dir = TempDir::new().unwrap();
    let sp = square_spectrum(dir.path());
    let cfg = write(
        dir.path(),
        "all.json",
        r#"{
            "rho": {"kind": "power", "coefficient": 1.0, "exponent": 2.0},
            "phi": {"coefficient": 1.0, "exponent": 2.0},
            "function": {"kind": "exp-inverse-power", "exponent": 1.0},
            "i_max": 50,
            "n_max": 40
        }"#,
    );
    for cmd in [
        "psi",
        "I",
        "rho",
        "self-neglect",
        "aux-estimate",
        "reconstruct",
        "repr2",
        "kernel",
    ] {
        let out = run(&[
            cmd,
            "--spectrum",
            sp.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let (_, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
        assert!(!rows.is_empty(), "{cmd}");
    }
    let out = run(&["reconstruct", "--config", cfg.to_str().unwrap()]);
    let a_sq = column(&String::from_utf8(out.stdout).unwrap(), "a_sq");
    assert_eq!(a_sq.len(), 50);
    assert!((a_sq[9] - 100.0).abs() < 1e-8);
}

#[test]
fn cf_oracle_reports_brackets() {
    let dir = TempDir::new().unwrap();
    let sp = square_spectrum(dir.path());
    let cfg = write(
        dir.path(),
        "cf.json",
        r#"{"epsilon_grid": [0.5], "oracle": {"method": "cf-inversion", "terms": 1000}}"#,
    );
    let out = run(&[
        "oracle",
        "--spectrum",
        sp.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let est = column(&text, "estimate")[0];
    let lo = column(&text, "bracket_lo")[0];
    let hi = column(&text, "bracket_hi")[0];
    assert!(lo <= est && est <= hi && lo > 0.12);
}
