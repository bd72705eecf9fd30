use std::process::{Command, Output};

use liouville::manifold::ManifoldSpec;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liouville")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn classify_reports_region() {
    let out = run(&["classify", "--m", "2", "--p", "2", "--q", "0"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["region"], "G1");
    assert_eq!(v["growth"]["alpha"], 4.0);
    assert_eq!(v["growth"]["beta"], 1.0);
    assert_eq!(v["k_region"]["tag"], "K2");
}

#[test]
fn negative_values_parse() {
    let out = run(&["classify", "--m", "2", "--p", "-1", "--q", "0"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["region"], "G6");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["classify", "--m", "2", "--p", "1"]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--m", "1", "--p", "1", "--q", "0"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}

#[test]
fn construct_then_verify() {
    let path = std::env::temp_dir().join(format!("liouville-cli-{}.json", std::process::id()));
    let p = path.to_str().unwrap();
    let out = run(&["construct", "--m", "2", "--p", "1", "--q", "0", "--out", p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["pass"], true);
    let out = run(&["verify", "--solution", p]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["matches_stored"], true);
    assert_eq!(v["pass"], true);
    std::fs::remove_file(&path).ok();
}

#[test]
fn construct_is_deterministic() {
    let args = ["construct", "--m", "2", "--p", "-1", "--q", "1.5", "--seed", "7"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn criteria_csv_from_saved_manifold() {
    let path = std::env::temp_dir().join(format!("liouville-man-{}.json", std::process::id()));
    let spec = ManifoldSpec::power_log(3.0, 0.0);
    std::fs::write(&path, spec.to_json().unwrap()).unwrap();
    let out = run(&["criteria", "--manifold", path.to_str().unwrap(), "--m", "3", "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("criterion"));
    assert_eq!(lines.count(), 3);
    std::fs::remove_file(&path).ok();
}
