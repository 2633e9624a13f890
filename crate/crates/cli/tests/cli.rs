use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lindblad-learn"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn small_config(dir: &Path) -> String {
    let cfg = serde_json::json!({
        "model": {"variant": "ModelI", "n": 4, "v_prime": 0.1},
        "simulation": {"t_train": 1.0, "t_extrapolate": 2.0, "n_trajectories": 4, "n_eval_trajectories": 2},
        "training": {"epochs": 2, "batches_per_epoch": 10},
        "metrics": {"window_samples": 200}
    });
    let path = dir.join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let g = stdout_json(&run(dir.path(), &["gen-data", "--config", &cfg]));
    assert_eq!(g["trajectories"], 6);
    assert_eq!(g["snapshots"], 201);
    let t = stdout_json(&run(dir.path(), &["train", "--config", &cfg]));
    assert!(t["final_train_loss"].as_f64().unwrap().is_finite());
    let e = stdout_json(&run(dir.path(), &["eval", "--config", &cfg]));
    assert!(e["result"]["report"]["i_err_interp"].as_f64().unwrap() >= 0.0);
    let s = stdout_json(&run(dir.path(), &["stationary", "--config", &cfg]));
    assert_eq!(s["command"], "stationary");
    let i = stdout_json(&run(dir.path(), &["interpret", "--config", &cfg]));
    let frac = i["delta_zz_fraction"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&frac));
    for f in ["error_report.csv", "error_report.json", "stationary.json", "interpret.json", "jumps.csv"] {
        assert!(dir.path().join("out/reports").join(f).exists(), "{f}");
    }
}

#[test]
fn same_seed_gives_identical_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    stdout_json(&run(dir.path(), &["gen-data", "--config", &cfg, "--seed", "5"]));
    let a = std::fs::read(dir.path().join("out/data/traj_000.csv")).unwrap();
    stdout_json(&run(dir.path(), &["gen-data", "--config", &cfg, "--seed", "5", "--threads", "1"]));
    assert_eq!(std::fs::read(dir.path().join("out/data/traj_000.csv")).unwrap(), a);
    stdout_json(&run(dir.path(), &["gen-data", "--config", &cfg, "--seed", "6"]));
    assert_ne!(std::fs::read(dir.path().join("out/data/traj_000.csv")).unwrap(), a);
}

#[test]
fn train_without_data_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = stderr_json(&run(dir.path(), &["train"]));
    assert!(err["error"].is_string());
    assert!(err["message"].as_str().unwrap().contains("gen-data"));
}

#[test]
fn oversized_chain_is_a_capacity_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    std::fs::write(&path, r#"{"model": {"variant": "ModelI", "n": 13}}"#).unwrap();
    let err = stderr_json(&run(dir.path(), &["gen-data", "--config", path.to_str().unwrap()]));
    assert_eq!(err["error"], "capacity");
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"model": {"variant": "ModelI", "spins": 7}}"#).unwrap();
    let out = run(dir.path(), &["gen-data", "--config", path.to_str().unwrap()]);
    assert_eq!(stderr_json(&out)["error"], "json");
}
