//! Exit codes and outputs of the command-line tool.

use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_neural-fdiv");

const CONFIG: &str = r#"{
    "name": "cli",
    "kind": "chisq",
    "pair": {"dims": 1,
             "p": [{"type": "trunc_gauss", "mu": 0, "sigma": 1, "lo": 0, "hi": 1}],
             "q": [{"type": "uniform", "lo": 0, "hi": 1}]},
    "sweep": {"ns": [100, 200]},
    "schedule_mode": {"explicit": [3, 3]},
    "replicas": 2,
    "train": {"epochs": 2},
    "record_timing": false
}"#;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn sweep_writes_runs_summary_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("runs.csv");
    let (code, _, err) = run(&["sweep-n", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let runs = std::fs::read_to_string(&out).unwrap();
    assert_eq!(runs.lines().count(), 5);
    assert!(dir.path().join("runs_summary.csv").exists());
    assert!(dir.path().join("runs_summary.gp").exists());

    let first = runs.clone();
    let (code, _, _) = run(&["sweep-n", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--resume"]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), first);
}

#[test]
fn ground_truth_and_estimate_print_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, CONFIG).unwrap();
    let (code, stdout, _) = run(&["ground-truth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["kind"], "chisq");
    assert!(v["value"].as_f64().unwrap() > 0.0);

    let (code, stdout, _) = run(&["estimate", "--config", cfg.to_str().unwrap(), "--seed", "4"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["seed"], 4);
    assert_eq!(v["trajectory"].as_array().unwrap().len(), 2);
    assert_eq!(v["checkpoint"]["beta"].as_array().unwrap().len(), 3);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, CONFIG.replace("\"replicas\": 2", "\"replicas\": 2, \"bogus\": true")).unwrap();
    assert_eq!(run(&["ground-truth", "--config", cfg.to_str().unwrap()]).0, 2);
    assert_eq!(run(&["ground-truth", "--config", "/nonexistent.json"]).0, 2);
    let hellinger_k2 = CONFIG.replace("\"chisq\"", "\"hellinger\"").replace("[3, 3]", "[2, 2]");
    std::fs::write(&cfg, hellinger_k2).unwrap();
    let out = dir.path().join("runs.csv");
    assert_eq!(run(&["sweep-n", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).0, 2);
    assert_eq!(run(&["bounds", "--kind", "kl", "--k", "0", "--n", "10"]).0, 2);
}

#[test]
fn bounds_csv_output() {
    let (code, stdout, _) = run(&[
        "bounds", "--kind", "kl", "--k", "1", "--n", "2", "--a1", "1", "--a2", "1", "--a3", "1", "--format", "csv",
    ]);
    assert_eq!(code, 0);
    let row: Vec<&str> = stdout.lines().nth(1).unwrap().split(',').collect();
    let e: f64 = row[11].parse().unwrap();
    assert!((e - 4.0 * (std::f64::consts::E.powi(2) + 1.0)).abs() < 1e-9);
}
