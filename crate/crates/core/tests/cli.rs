use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn jot() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jot"));
    c.env_remove("JOT_JOBS");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_config(name: &str, body: &str) -> PathBuf {
    let p = scratch(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    jot().arg(cmd).arg("--config").arg(config).args(extra).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sample_matrix_is_byte_identical_across_runs_and_thread_counts() {
    let cfg = write_config("ibp.json", r#"{"model": "ibp", "c": 1, "theta": 1, "n": 5, "replicates": 3}"#);
    let a = run("sample-matrix", &cfg, &["--seed", "42"]);
    let b = run("sample-matrix", &cfg, &["--seed", "42", "--jobs", "1"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
    let c = run("sample-matrix", &cfg, &["--seed", "43"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn csv_output_gets_a_json_sidecar_with_provenance() {
    let cfg = write_config("stable.json", r#"{"model": {"family": "stable", "c": 0.5, "alpha": 0.5}, "replicates": 2}"#);
    let out = scratch("measure.csv");
    let o = run("sample-measure", &cfg, &["--out", out.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("replicate,rank,weight"));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("csv.json")).unwrap()).unwrap();
    let side = &doc["header"];
    assert_eq!(side["command"], "sample-measure");
    assert_eq!(side["seeds"][0], 3);
    assert!(doc["result"].is_object());
    assert_eq!(side["config"]["seed"], 3);
    let hash = side["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(side["version"].is_string());
}

#[test]
fn dickman_table_matches_first_two_intervals() {
    let cfg = write_config("dickman.json", r#"{"c": 1, "grid": [0.5, 1.5, 1.75], "output": {"format": "json"}}"#);
    let o = run("dickman", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let table = v["result"]["table"].as_array().unwrap();
    assert_eq!(table.len(), 3);
    let e_gamma = 0.561_459_483_566_885_2;
    // e^{-γ} on (0, 1], (1 - ln t) e^{-γ} on (1, 2]
    let want = [e_gamma, (1.0 - 1.5f64.ln()) * e_gamma, (1.0 - 1.75f64.ln()) * e_gamma];
    for (row, w) in table.iter().zip(want) {
        let pdf = row["pdf"].as_f64().unwrap();
        assert!((pdf - w).abs() < 1e-11, "{row} vs {w}");
    }

    let cfg = write_config("dickman_bad.json", r#"{"grid": [1.0, 0.0, 2.0]}"#);
    let o = run("dickman", &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/grid/1"), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_json_pointer() {
    let cfg = write_config("bad.json", r#"{"model": {"family": "stable", "c": 1, "alpha": 2.0}}"#);
    let o = run("sample-measure", &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/model/alpha"), "{}", stderr(&o));

    let cfg = write_config("typo.json", r#"{"model": "stable", "c": "one", "alpha": 0.5}"#);
    let o = run("sample-measure", &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/c"), "{}", stderr(&o));

    let cfg = write_config("broken.json", "{ not json");
    assert_eq!(run("urn", &cfg, &[]).status.code(), Some(1));
    assert_eq!(run("urn", &scratch("missing.json"), &[]).status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(jot().arg("nope").output().unwrap().status.code(), Some(1));
    assert_eq!(jot().arg("--help").output().unwrap().status.code(), Some(0));
    let o = jot().args(["urn", "--jobs", "0"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn diagnose_lecam_reports_exact_tv() {
    let cfg = write_config("lecam.json", r#"{"test": "lecam", "weights": [0.5, 0.5]}"#);
    let o = run("diagnose", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let tv = v["result"]["outcome"]["tv_exact"].as_f64();
    let e = (-1.0f64).exp();
    let oracle = 0.5 * ((0.25 - e).abs() + (0.5 - e).abs() + (0.25 - e / 2.0).abs() + (1.0 - 2.5 * e));
    assert!((tv.expect("tv_exact in output") - oracle).abs() < 1e-11, "{v}");
}

#[test]
fn accept_subset_prints_one_line_per_criterion() {
    let cfg = write_config("accept.json", r#"{"criteria": [8], "scale": 0.1}"#);
    let o = run("accept", &cfg, &["--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("criterion 8 le cam: PASS"), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["header"]["config"]["seed"], 5);

    let cfg = write_config("accept_bad.json", r#"{"criteria": [12]}"#);
    let o = run("accept", &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/criteria/0"), "{}", stderr(&o));
}
