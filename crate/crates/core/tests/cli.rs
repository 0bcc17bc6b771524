use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dirac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirac"))
        .args(args)
        .env("DIRAC_THREADS", "2")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const PERIODIC: &str = r#"{"potential": {"kind": "expr", "P": "0", "Q": "0"}, "bc": [[1,0,-1,0],[0,1,0,-1]]}"#;

#[test]
fn classify_periodic_is_regular() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "p.json", PERIODIC);
    let out = dirac(&["classify", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["class"], "Regular");
    assert_eq!(v["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["spec_hash"].as_str().unwrap().len(), 64);
    assert!(v["minors"]["a14"].is_array());
}

#[test]
fn det_lattice_minimum_is_next_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "p.json", PERIODIC);
    let output = dir.path().join("det.csv");
    let out = dirac(&["det", "--input", &input, "--rect", "-1,1,-1,1", "--grid", "50", "--output", output.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&output).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# dirac"));
    assert!(lines.next().unwrap().starts_with("re,im,"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2500);
    let best = rows.iter().min_by(|a, b| a[4].total_cmp(&b[4])).unwrap();
    let spacing = 2.0 / 49.0;
    assert!(best[0].abs() <= spacing && best[1].abs() <= spacing, "{best:?}");
}

#[test]
fn malformed_input_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.json", "{\"bc\": [[1,0,");
    let output = dir.path().join("out.json");
    let out = dirac(&["classify", "--input", &input, "--output", output.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!output.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn bad_flag_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "p.json", PERIODIC);
    let out = dirac(&["spectrum", "--input", &input, "--rect", "1,0,0,1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dirac(&["det", "--input", &input, "--tol", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_error_exits_1_with_report() {
    let dir = tempfile::tempdir().unwrap();
    // V = 0 with a degenerate bc: the determinant vanishes identically
    let input = write(dir.path(), "d.json", r#"{"potential": {"kind": "expr", "P": "0", "Q": "0"}, "bc": [[1,0,0,0],[0,0,1,0]]}"#);
    let output = dir.path().join("s.json");
    let out = dirac(&["spectrum", "--input", &input, "--rect", "-2,2,-1,1", "--output", output.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    assert!(v["error"]["message"].is_string());
    assert!(v["spec_hash"].is_string());
}

#[test]
fn spectrum_and_theorem_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "p.json", PERIODIC);
    let out = dirac(&["spectrum", "--input", &input, "--rect", "-3,3,-1,1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["count"], 6);
    let out = dirac(&["check-theorem", "--input", &input]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"]["conclusion"], "CompleteAndMinimal");
}

#[test]
fn dump_solution_rows_cover_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "p.json", PERIODIC);
    let out = dirac(&["dump-solution", "--input", &input, "--lambda", "-1.5,0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let x: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!((x - std::f64::consts::PI).abs() < 1e-15);
}
