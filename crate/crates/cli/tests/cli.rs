use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpentropy")).args(args).output().expect("binary runs")
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    let doc = serde_json::from_slice(&out.stdout).expect("stdout is one JSON document");
    (out.status.code().expect("exit code"), doc)
}

#[test]
fn constants_reports_the_entropy_constant() {
    let (code, doc) = run_json(&["constants", "--n", "3", "--p", "2"]);
    assert_eq!(code, 0);
    let a0 = doc["result"]["entropy_constant"].as_f64().unwrap();
    let expected = 2.0 / (3.0 * std::f64::consts::PI * std::f64::consts::E);
    assert!((a0 - expected).abs() <= 1e-15 * expected, "{a0} vs {expected}");
    assert_eq!(doc["config"]["n"], 3);
    assert_eq!(doc["tool"], "lpentropy");
    assert!(doc["version"].is_string());
}

#[test]
fn extremal_deficit_vanishes() {
    let (code, doc) = run_json(&["deficit", "--n", "3", "--p", "2", "--b", "1"]);
    assert_eq!(code, 0);
    assert!(doc["result"]["deficit"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn heat_norm_on_the_standard_circle_is_euclidean() {
    let (code, doc) = run_json(&["heat-norm", "--n", "1", "--scale", "6.2832", "--t", "0.01"]);
    assert_eq!(code, 0);
    assert!((doc["result"]["ratio"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
}

#[test]
fn identical_arguments_give_identical_bytes() {
    let args = ["gn-estimate", "--n", "3", "--p", "2", "--q", "1.8", "--seed", "7", "--budget", "40"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["gn-limit", "--q", "1.7,1.9", "--budget", "20"];
    let many = run(&args);
    let one = Command::new(env!("CARGO_BIN_EXE_lpentropy")).args(args).env("THREADS", "1").output().unwrap();
    assert_eq!(many.status.code(), Some(0));
    assert_eq!(many.stdout, one.stdout);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["constants", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["witness", "--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_one() {
    let (code, doc) = run_json(&["constants", "--p", "0.5"]);
    assert_eq!(code, 1);
    assert_eq!(doc["error"]["kind"], "domain");
}

#[test]
fn failed_property_check_exits_three() {
    let (code, doc) = run_json(&["deficit", "--tol", "1e-30"]);
    assert_eq!(code, 3);
    assert_eq!(doc["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn witness_respects_the_sharp_constant() {
    let (below, doc) = run_json(&["witness", "--n", "3", "--p", "2", "--a-ratio", "0.9"]);
    assert_eq!(below, 0);
    assert_eq!(doc["result"]["witness"]["violated"], true);
    let (at, doc) = run_json(&["witness", "--n", "3", "--p", "2", "--a-ratio", "1.0"]);
    assert_eq!(at, 0);
    assert_eq!(doc["result"]["witness"]["violated"], false);
}

#[test]
fn out_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tables");
    let (code, _) = run_json(&["witness", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(out.join("witness.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epsilon,margin"));
    assert_eq!(lines.count(), 21);
}

#[test]
fn hc_table_passes_at_the_sharp_constant() {
    let (code, doc) = run_json(&["hc", "--n", "3"]);
    assert_eq!(code, 0);
    let rows = doc["result"]["ultracontractivity"]["rows"].as_array().unwrap();
    assert!(rows.iter().all(|r| r["status"] != "fail"));
}
