use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use historic::cli::ResultRecord;
use historic::gluing::Checkpoint;

fn historic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_historic")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p.display().to_string()
}

fn read_record(dir: &Path) -> ResultRecord {
    serde_json::from_str(&fs::read_to_string(dir.join("record.json")).unwrap()).unwrap()
}

#[test]
fn delta_outside_unit_interval_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"seed": 1, "entropy": {"delta": 1.5}}"#);
    let out = historic(&["--config", &cfg, "entropy", "katok"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("entropy.delta = 1.5: must lie in (0,1)"), "{err}");
}

#[test]
fn every_violated_field_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"entropy": {"delta": 1.5, "eps": 0}, "pesin": {"sample": 0}}"#);
    let out = historic(&["--config", &cfg, "pesin-blocks"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for field in ["seed = missing", "entropy.eps = 0", "entropy.delta = 1.5", "pesin.sample = 0"] {
        assert!(err.contains(field), "{field} not in {err}");
    }
}

#[test]
fn identical_runs_give_identical_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"system": {"kind": "cat"}, "entropy": {"eps": 0.1, "n_min": 2, "n_max": 4, "sample": 4000, "grid": 24}}"#,
    );
    let mut records = Vec::new();
    for (i, workers) in ["1", "2", "1"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let out = historic(&["--config", &cfg, "--seed", "9", "--workers", workers, "--out", out_dir.to_str().unwrap(), "entropy", "katok"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        records.push((read_record(&out_dir).canonical_json(), fs::read_to_string(out_dir.join("counts.csv")).unwrap()));
    }
    assert_eq!(records[0], records[1]);
    assert_eq!(records[0], records[2]);

    let other = dir.path().join("other");
    historic(&["--config", &cfg, "--seed", "10", "--out", other.to_str().unwrap(), "entropy", "katok"]);
    assert_ne!(read_record(&other).config_hash, read_record(&dir.path().join("run0")).config_hash);
}

#[test]
fn simulate_writes_the_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"seed": 2, "system": {"kind": "shift"}, "start": "01(1)", "steps": 4}"#);
    let out = historic(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert_eq!(csv, "n,word\n0,0(1)\n1,(1)\n2,(1)\n3,(1)\n");
}

#[test]
fn construct_historic_on_the_shift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 4, "system": {"kind": "shift"},
            "targets": [{"kind": "word", "word": "(0)"}, {"kind": "word", "word": "(1)"}],
            "observable": "first-symbol", "basis_truncation": 8,
            "construct": {"library": {"k_max": 5, "base_length": 2, "length_step": 2, "cell": 0.75},
                          "schedule": {"growth": 2.5}}}"#,
    );
    let out = historic(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "construct-historic"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("n,average\n"));
    let cps: Vec<Checkpoint> = serde_json::from_str(&fs::read_to_string(dir.path().join("checkpoints.json")).unwrap()).unwrap();
    assert_eq!(cps.iter().map(|c| c.q).collect::<Vec<_>>(), [2, 3, 4, 5, 6]);
    let rec = read_record(dir.path());
    assert!(rec.pass && rec.metric("historic").unwrap().value == 1.0);
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // Random words cannot support exponent 2 > log 2.
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 3, "system": {"kind": "shift"}, "entropy": {"eps": 0.5, "s": 2.0, "n_min": 4, "n_max": 6, "sample": 512}}"#,
    );
    let out = historic(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "entropy", "edp"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL entropy-edp"));
}

#[test]
fn experiments_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = historic(&["--out", dir.path().to_str().unwrap(), "experiment", "shift-oracle"]);
    assert_eq!(out.status.code(), Some(0));
    let rec = read_record(dir.path());
    assert!(rec.pass && rec.experiment == "shift-oracle" && rec.seed == 1);
    assert!(dir.path().join("counts.csv").exists());

    let list = historic(&["experiment", "list"]);
    assert_eq!(list.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&list.stdout).lines().count(), 9);

    let out = historic(&["experiment", "no-such-thing"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cat-entropy"));
}

#[test]
fn lyapunov_needs_a_torus_map() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"seed": 1, "system": {"kind": "shift"}}"#);
    let out = historic(&["--config", &cfg, "lyapunov"]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(dir.path(), r#"{"seed": 1, "steps": 200, "start": [0.2, 0.3]}"#);
    let out = historic(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "lyapunov"]);
    assert_eq!(out.status.code(), Some(0));
    let rec = read_record(dir.path());
    let l1 = rec.metric("lambda1").unwrap().value;
    assert!((l1 - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-8);
}
