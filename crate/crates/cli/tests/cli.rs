//! End-to-end runs of the `dpd` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn pd_config(extra: Value) -> Value {
    let mut cfg = json!({
        "payoffs": {"R": [2, 1], "S": [3, 1], "T": [4, 1], "P": [1, 1]},
        "initial": {"atoms": [
            {"wealth": [4, 1], "strategy": 0, "prob": [1, 2]},
            {"wealth": [4, 1], "strategy": 1, "prob": [1, 2]}
        ]},
        "N": 6,
        "graph": {"torus": 2},
        "horizon": 2.0,
        "snapshot_times": [0.0, 1.0, 2.0],
        "seed": 5
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    cfg
}

fn write_config(dir: &Path, cfg: &Value) -> String {
    let path = dir.join("cfg.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

fn dpd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpd")).args(args).current_dir(dir).env_remove("DPD_WORKERS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn validate_accepts_a_good_config_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &pd_config(json!({})));
    let out = dpd(dir.path(), &["validate", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("valid"));
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1, "only the config file should exist");
}

#[test]
fn payoff_violation_exits_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg =
        write_config(dir.path(), &pd_config(json!({"payoffs": {"R": [2, 1], "S": [3, 1], "T": [2, 1], "P": [1, 1]}})));
    let out = dpd(dir.path(), &["validate", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("payoffs.T"));
}

#[test]
fn usage_and_io_failures_have_their_own_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&dpd(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&dpd(dir.path(), &["validate", "missing.json"])), 3);

    // the output directory path is taken by a regular file
    fs::write(dir.path().join("blocked"), "x").unwrap();
    let cfg = write_config(dir.path(), &pd_config(json!({"output": "blocked"})));
    assert_eq!(code(&dpd(dir.path(), &["simulate", &cfg])), 3);
}

#[test]
fn simulate_refuses_non_particle_engines() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &pd_config(json!({"engine": "meanfield"})));
    let out = dpd(dir.path(), &["simulate", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("engine"));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    for engine in ["spatial", "matching"] {
        let dir = TempDir::new().unwrap();
        let cfg = write_config(dir.path(), &pd_config(json!({"engine": engine})));
        for out in ["a", "b"] {
            let o = dpd(dir.path(), &["simulate", &cfg, "--out", out]);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        }
        let a = read(&dir.path().join("a"), "snapshots.csv");
        assert_eq!(a, read(&dir.path().join("b"), "snapshots.csv"));
        // 3 snapshots of 6 particles plus the header
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 19);
        let meta_a = String::from_utf8(read(&dir.path().join("a"), "metadata.json")).unwrap();
        let meta_b = String::from_utf8(read(&dir.path().join("b"), "metadata.json")).unwrap();
        // only the echoed output directory differs
        assert_eq!(meta_a.replace("\"a\"", "\"b\""), meta_b);
    }
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &pd_config(json!({"engine": "matching"})));
    assert_eq!(code(&dpd(dir.path(), &["simulate", &cfg, "--out", "a"])), 0);
    assert_eq!(code(&dpd(dir.path(), &["simulate", &cfg, "--out", "b", "--seed", "99"])), 0);
    assert_ne!(read(&dir.path().join("a"), "snapshots.csv"), read(&dir.path().join("b"), "snapshots.csv"));
    let meta: Value = serde_json::from_slice(&read(&dir.path().join("b"), "metadata.json")).unwrap();
    assert_eq!(meta["seed"], 99);
    assert_eq!(meta["config"]["seed"], 99);
}

#[test]
fn metadata_echoes_defaults_and_truncation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &pd_config(json!({})));
    let o = dpd(dir.path(), &["solve", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta: Value = serde_json::from_slice(&read(&dir.path().join("out"), "metadata.json")).unwrap();
    let defaults: Vec<&str> =
        meta["defaults"].as_array().unwrap().iter().map(|d| d["field"].as_str().unwrap()).collect();
    assert!(defaults.contains(&"dt") && defaults.contains(&"epsilon") && !defaults.contains(&"N"));
    assert!(meta["truncation"]["k_max"].as_u64().unwrap() > 0);
    assert!(meta["truncation"]["bound"].as_f64().unwrap() < 1e-10);
    assert_eq!(meta["config"]["payoffs"]["T"], json!([4, 1]));
    // collision mass of the 2x2 torus is 1/4
    assert_eq!(meta["kappa"], 0.25);

    let csv = String::from_utf8(read(&dir.path().join("out"), "meanfield.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time,wealth_num,wealth_den,strategy,mass"));
    let first: Vec<&str> = csv.lines().skip(1).take(2).collect();
    assert_eq!(first, ["0,4,1,0,0.5", "0,4,1,1,0.5"]);
    for t in ["0", "1", "2"] {
        let total: f64 = csv
            .lines()
            .skip(1)
            .filter(|l| l.split(',').next() == Some(t))
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "t = {t}: mass {total}");
    }
    assert!(csv.lines().any(|l| l.contains(",dead,,")));
}

#[test]
fn oversized_lattice_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &pd_config(json!({"max_states": 3})));
    let o = dpd(dir.path(), &["solve", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap"));
}

#[test]
fn solve_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &pd_config(json!({})));
    assert_eq!(code(&dpd(dir.path(), &["solve", &cfg, "--out", "a"])), 0);
    assert_eq!(code(&dpd(dir.path(), &["solve", &cfg, "--out", "a2"])), 0);
    assert_eq!(read(&dir.path().join("a"), "meanfield.csv"), read(&dir.path().join("a2"), "meanfield.csv"));
}

fn degenerate_homogenization() -> Value {
    pd_config(json!({
        "graph": {"torus": 1},
        "N": 4,
        "lambda": 1.0,
        "horizon": 3.0,
        "replicas": 200,
        "experiment": {"d_grid": [1.0, 4.0], "bootstrap": 50}
    }))
}

#[test]
fn degenerate_homogenization_passes_end_to_end() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &degenerate_homogenization());
    let o = dpd(dir.path(), &["experiment", "homogenization", &cfg]);
    assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(read(&dir.path().join("out"), "homogenization.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("d,quantity,statistic,stderr,replicas,verdict"));
    assert_eq!(csv.lines().count(), 4);
    let report: Value = serde_json::from_slice(&read(&dir.path().join("out"), "report.json")).unwrap();
    assert!(report["verdicts"].as_array().unwrap().iter().all(|v| v["passed"] == true));
}

#[test]
fn experiments_are_byte_identical_across_runs_and_worker_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &degenerate_homogenization());
    assert_eq!(code(&dpd(dir.path(), &["experiment", "homogenization", &cfg, "--out", "a", "--workers", "1"])), 0);
    assert_eq!(code(&dpd(dir.path(), &["experiment", "homogenization", &cfg, "--out", "b", "--workers", "3"])), 0);
    for f in ["homogenization.csv", "report.json"] {
        assert_eq!(read(&dir.path().join("a"), f), read(&dir.path().join("b"), f), "{f}");
    }
}

#[test]
fn worker_environment_variable_is_checked_and_overridden_by_the_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &pd_config(json!({"d": 4.0, "horizon": 50.0, "snapshot_times": [50.0]})));
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_dpd"))
            .args(args)
            .current_dir(dir.path())
            .env("DPD_WORKERS", "lots")
            .output()
            .unwrap()
    };
    let o = run(&["experiment", "occupation", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("DPD_WORKERS"));
    assert_ne!(code(&run(&["experiment", "occupation", &cfg, "--workers", "2"])), 2);
}

#[test]
fn failed_verdict_exits_1_and_still_writes_outputs() {
    let dir = TempDir::new().unwrap();
    // a short walk cannot equilibrate to within a zero tolerance
    let cfg = write_config(
        dir.path(),
        &pd_config(json!({"graph": {"torus": 3}, "d": 1.0, "horizon": 5.0, "experiment": {"tolerance": 0.0}})),
    );
    let o = dpd(dir.path(), &["experiment", "occupation", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    let csv = String::from_utf8(read(&dir.path().join("out"), "occupation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
}
