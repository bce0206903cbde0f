use std::path::Path;
use std::process::{Command, Output};

use nanoloc::artifact::{read_summary_csv, CSV_HEADER};

fn nanoloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanoloc")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"{"grid_rows": 5, "grid_cols": 5, "iterations": 4}"#;

#[test]
fn run_emits_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = nanoloc(&["run", "--config", &cfg, "--workers", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let rows = read_summary_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].attempts(), 100);
    assert_eq!(rows[0].seed, 1);
}

#[test]
fn output_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let a = nanoloc(&["run", "--config", &cfg, "--workers", "1", "--seed", "5"]);
    let b = nanoloc(&["run", "--config", &cfg, "--workers", "4", "--seed", "5"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_writes_file_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out_path = dir.path().join("sweep.csv");
    let samples = dir.path().join("samples");
    let out = nanoloc(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "bandwidth",
        "--values",
        "1e11,1e12",
        "--out",
        out_path.to_str().unwrap(),
        "--dump-samples",
        samples.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_summary_csv(std::fs::File::open(&out_path).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.sweep_axis == "bandwidth"));
    assert_ne!(rows[0].seed, rows[1].seed);
    let dumped = std::fs::read_to_string(dir.path().join("samples.1")).unwrap();
    assert_eq!(dumped.lines().count() as u64, rows[1].count);
}

#[test]
fn sweep_accepts_words() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = nanoloc(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "mobility",
        "--values",
        "half_sphere,half_cylinder",
        "--common-seeds",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_summary_csv(&out.stdout[..]).unwrap();
    assert_eq!(rows[0].sweep_value, "half_sphere");
    assert_eq!(rows[0].seed, rows[1].seed);
}

#[test]
fn compare_reports_three_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = nanoloc(&["compare", "--config", &cfg, "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let methods: Vec<&str> = v["rows"].as_array().unwrap().iter().map(|r| r["sweep_value"].as_str().unwrap()).collect();
    assert_eq!(methods, ["tof", "aoa", "rss"]);
    assert_eq!(v["config"]["iterations"], 4);
}

#[test]
fn latency_reference_value() {
    let out = nanoloc(&["latency", "--m", "625", "--n", "4", "--k", "3", "--t-tof", "1e-6", "--t-tr", "1e-7"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().nth(1).unwrap();
    let t: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
    assert!((t - 7.5625e-3).abs() < 1e-15, "{line}");
}

#[test]
fn latency_grid_with_estimated_tof() {
    let out = nanoloc(&["latency", "--m", "1,10", "--n", "4,8", "--k", "1,3"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 9);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"spacing": -1}"#);
    let out = nanoloc(&["run", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spacing"));

    let unknown = write(dir.path(), "u.json", r#"{"colour": 1}"#);
    assert_eq!(nanoloc(&["run", "--config", &unknown]).status.code(), Some(2));
    assert_eq!(nanoloc(&["run", "--config", "/nonexistent/c.json"]).status.code(), Some(2));
    let out = nanoloc(&["sweep", "--config", &write(dir.path(), "c.json", SMALL), "--axis", "nope", "--values", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let table = write(dir.path(), "t.txt", "1e12 abc\n");
    assert_eq!(nanoloc(&["run", "--absorption-table", &table]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = nanoloc(&["run", "--config", &cfg, "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn empty_config_file_is_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.json", "");
    let table = write(dir.path(), "t.txt", "# lossless medium\n1e11 0\n2e12 0\n");
    let out = nanoloc(&["latency", "--config", &cfg, "--absorption-table", &table, "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let t = v[0]["t_tof_s"].as_f64().unwrap();
    assert!((t - 2.361495e-9).abs() < 1e-14, "{t}");
}
