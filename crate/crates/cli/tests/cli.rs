//! End-to-end runs of the `srbm` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn srbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srbm"))
        .args(args)
        .env("SRBM_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_out(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

const TANDEM3: &str = r#"{"d":3,"beta":[1,2,2,2],"cv":[1,1,1,1]}"#;
const STABLE2: &str = r#"{"d":2,"sigma":[[2,-1],[-1,2]],"mu":[-1,-0.5],"r":[[1,0],[-1,1]]}"#;

#[test]
fn check_accepts_valid_model() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", STABLE2);
    let v = json_out(&srbm(&["check", s(&m), "--matrix-class"]));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "check");
    assert_eq!(v["report"]["stable"], true);
    assert_eq!(v["report"]["r_classes"]["m_matrix"], true);
    assert_eq!(v["model_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn non_symmetric_sigma_is_a_structural_error() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", r#"{"d":2,"sigma":[[1,0.5],[0,1]],"mu":[-1,-1],"r":[[1,0],[0,1]]}"#);
    let o = srbm(&["check", s(&m)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("symmetric"));
}

#[test]
fn completely_s_example_and_its_inverse() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", r#"{"d":2,"sigma":[[1,0],[0,1]],"mu":[1,-1],"r":[[1,2],[1,1]]}"#);
    let v = json_out(&srbm(&["check", s(&m)]));
    assert_eq!(v["report"]["r_completely_s"], true);

    let inv = write(&dir, "inv.json", r#"{"d":2,"sigma":[[1,0],[0,1]],"mu":[-1,-1],"r":[[-1,2],[1,-1]]}"#);
    let o = srbm(&["check", s(&inv)]);
    let v = json_out(&o);
    assert_eq!(v["report"]["r_completely_s"], false);
    assert_eq!(v["report"]["r_failing_subset"], serde_json::json!([1]));
    assert!(String::from_utf8_lossy(&o.stderr).contains("completely-S"));
    assert_eq!(srbm(&["--strict", "check", s(&inv)]).status.code(), Some(2));
}

#[test]
fn decompose_search_finds_tandem_split() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", r#"{"d":3,"beta":[1,1.5,2,2.5],"cv":[1,1,2,3]}"#);
    let v = json_out(&srbm(&["decompose", s(&m), "--search"]));
    let list = v["report"]["decompositions"].as_array().unwrap();
    assert!(!list.is_empty());
    let o = srbm(&["decompose", s(&m), "--partition", "1/2,3", "--output", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("partition,decomposable"));
    assert!(text.contains("1/2,3\",true") || text.contains("\"1/2,3\",true"), "{text}");
}

#[test]
fn tandem_file_is_built_and_checked() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", TANDEM3);
    let v = json_out(&srbm(&["tandem", s(&m)]));
    let splits = v["report"]["splits"].as_array().unwrap();
    assert_eq!(splits.len(), 2);
    for sp in splits {
        assert_eq!(sp["closed_form"], true);
        assert_eq!(sp["check"]["decomposable"], true);
    }
    assert_eq!(v["report"]["model"]["r"][1][0], -1.0);
    assert_eq!(v["report"]["stable"], true);
}

#[test]
fn unstable_simulation_is_refused() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "u.json", r#"{"d":1,"sigma":[[1]],"mu":[0.5],"r":[[1]]}"#);
    let o = srbm(&["simulate", s(&m), "--steps", "1000", "--reps", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not stable"));
    let o = srbm(&["simulate", s(&m), "--steps", "1000", "--reps", "1", "--force"]);
    assert!(o.status.success());
}

#[test]
fn reduce_round_trips_through_model_file() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", STABLE2);
    let v = json_out(&srbm(&["reduce", s(&m), "--set", "2"]));
    assert_eq!(v["report"]["u"], serde_json::json!([2]));
    // a model file written back out parses to the same hash
    let back = json_out(&srbm(&["tandem", s(&write(&dir, "t.json", TANDEM3))]));
    let model = write(&dir, "again.json", &back["report"]["model"].to_string());
    let again = json_out(&srbm(&["check", s(&model)]));
    assert_eq!(again["model_hash"], back["model_hash"]);
}

#[test]
fn fixed_seed_gives_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", STABLE2);
    let args = ["simulate", s(&m), "--steps", "20000", "--reps", "2", "--seed", "5"];
    let a = srbm(&args);
    let b = srbm(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let csv = dir.path().join("path.csv");
    let o = srbm(&[&args[..], &["--record-samples", s(&csv), "--record-every", "100", "--output", "csv"]].concat());
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("coordinate,mean"));
    let rows = fs::read_to_string(&csv).unwrap();
    assert!(rows.starts_with("t,z1,z2\n"));
    assert_eq!(rows.lines().count(), 201);
}

#[test]
fn bar_check_defaults_to_csv_and_refuses_non_skew() {
    let dir = TempDir::new().unwrap();
    let skew = write(&dir, "s.json", r#"{"d":2,"beta":[1,1.5,2],"cv":[1,1,1]}"#);
    let o = srbm(&["bar-check", s(&skew), "--theta-grid", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta1,theta2,residual,se"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 9);
    for r in rows {
        let res: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
        assert!(res.abs() < 1e-10, "{r}");
    }
    let other = write(&dir, "n.json", r#"{"d":2,"beta":[1,1.5,2],"cv":[1,2,1]}"#);
    assert_eq!(srbm(&["bar-check", s(&other), "--theta-grid", "3"]).status.code(), Some(1));
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", STABLE2);
    let out = dir.path().join("r.json");
    let o = srbm(&["product-form", s(&m), "--out", s(&out)]);
    assert!(o.status.success() && o.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["command"], "product-form");
}

#[test]
fn missing_file_and_bad_partition_exit_2() {
    assert_eq!(srbm(&["check", "/nonexistent/model.json"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", STABLE2);
    assert_eq!(srbm(&["decompose", s(&m), "--partition", "1,2"]).status.code(), Some(2));
}
