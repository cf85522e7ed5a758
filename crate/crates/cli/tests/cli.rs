use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn lwf(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lwf"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.code().is_some_and(|c| c < 2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn check_on_kingman_passes_with_infinite_c() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "kingman.json", r#"{"lambda0": 1.0}"#);
    let out = lwf(&cfg, &["check"]);
    assert!(out.status.success());
    let r = report(&out);
    assert_eq!(r["assumption"]["verdict"], true);
    assert_eq!(r["c_infinite"], true);
    assert_eq!(r["pass"], true);
}

#[test]
fn violated_condition_fails_check_and_blocks_fixation() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bad.toml",
        "lambda_atoms = [[0.5, 1.0]]\n[selection]\nkappa = 2\nbeta = [10.0]\np = [[0.0, 1.0, 1.0]]\n",
    );
    let out = lwf(&cfg, &["check"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["assumption"]["verdict"], false);
    let out = lwf(&cfg, &["fixation"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
}

#[test]
fn duality_at_time_zero_has_no_gap() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "genic.json",
        r#"{"lambda0": 1.0, "selection": {"kappa": 2, "beta": [1.0], "p": [[0.0, 1.0, 1.0]]}}"#,
    );
    let out = lwf(&cfg, &["duality", "--t", "0", "--replicas", "50"]);
    assert!(out.status.success());
    let r = report(&out);
    let gaps = r["outputs"]["gaps"].as_array().unwrap();
    assert_eq!(gaps.len(), 6);
    assert!(gaps.iter().all(|g| g["z"] == 0.0));
}

#[test]
fn moments_match_the_beta_law() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (0.6, 0.4);
    let cfg = write(&dir, "theta.toml", &format!("lambda0 = 1.0\ntheta_a = {a}\ntheta_A = {b}\n"));
    let out = lwf(&cfg, &["moments", "--n-max", "3", "--replicas", "20000", "--seed", "5"]);
    assert!(out.status.success());
    let r = report(&out);
    let rho1 = &r["outputs"]["rho"][1];
    let z = (rho1["mean"].as_f64().unwrap() - a / (a + b)) / rho1["se"].as_f64().unwrap();
    assert!(z.abs() <= 3.0, "z = {z}");
}

#[test]
fn same_seed_same_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "full.json",
        r#"{"lambda_atoms": [[0.5, 1.0]], "mu_atoms": [[0.4, 0.2]], "nu_atoms": [[0.25, 0.1]],
            "theta_a": 0.3, "theta_A": 0.2}"#,
    );
    let args = ["simulate-dual", "--v", "0,0.5,1", "--replicas", "200", "--seed", "9"];
    let first = lwf(&cfg, &args);
    let second = lwf(&cfg, &args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let other = lwf(&cfg, &["simulate-dual", "--v", "0,0.5,1", "--replicas", "200", "--seed", "10"]);
    assert_ne!(first.stdout, other.stdout);
}

#[test]
fn config_hash_ignores_formatting() {
    let dir = TempDir::new().unwrap();
    let json = write(&dir, "m.json", r#"{"theta_a": 0.3, "lambda0": 1.0, "theta_A": 0.2}"#);
    let toml = write(&dir, "m.toml", "lambda0 = 1.0\ntheta_a = 0.3\ntheta_A = 0.2\n");
    let a = report(&lwf(&json, &["check"]));
    let b = report(&lwf(&toml, &["check"]));
    assert_eq!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn unknown_keys_name_their_path() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "typo.json", r#"{"lambda0": 1.0, "selection": {"kappa": 2, "beta": [1.0], "p": [[0, 1, 1]], "gamma": 2}}"#);
    let out = lwf(&cfg, &["check"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("selection.gamma"), "{err}");
}

#[test]
fn csv_output_to_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "kingman.json", r#"{"lambda0": 1.0}"#);
    let out_path = dir.path().join("forward.csv");
    let out = lwf(
        &cfg,
        &["simulate-forward", "--replicas", "4", "--format", "csv", "--out", out_path.to_str().unwrap()],
    );
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("replica,x_t,jumps"));
    assert_eq!(lines.count(), 4);
}
