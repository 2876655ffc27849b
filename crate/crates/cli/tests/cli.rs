use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn dfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfl")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dfl-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn gen_writes_csv() {
    let csv = scratch("z2.csv");
    let out = dfl(&["gen", "--builtin", "z2", "--radius", "3", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    assert_eq!(rep["results"]["count"], 49);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().filter(|l| !l.trim().is_empty()).count(), 49);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: 0"));
}

#[test]
fn equidist_has_no_violations() {
    let out = dfl(&["equidist", "--d", "1", "--eps", "0.25", "--samples", "500"]);
    assert!(out.status.success());
    let rep = report(&out);
    assert_eq!(rep["results"]["violations"].as_array().unwrap().len(), 0);
    assert_eq!(rep["passed"], true);
}

#[test]
fn exponent_row() {
    let out = dfl(&["udt-exponents", "--n", "2", "--s", "3"]);
    assert!(out.status.success());
    assert_eq!(report(&out)["results"]["alpha"], "1");
}

#[test]
fn exit_codes() {
    assert_eq!(dfl(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(dfl(&["equidist", "--d", "1", "--eps", "0.7"]).status.code(), Some(3));
    assert_eq!(dfl(&["gen", "--spec", "/nonexistent/spec.json", "--radius", "2"]).status.code(), Some(3));
    assert_eq!(dfl(&["gen", "--builtin", "z2", "--radius", "100000"]).status.code(), Some(4));
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["udt-mc", "--u", "4,3,1", "--t", "4,8", "--samples", "2000", "--seed", "7"];
    let a = dfl(&args);
    let b = dfl(&args);
    assert!(a.status.code().is_some());
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["visibility", "--builtin", "peres", "--eps", "0.4,0.2", "--radius", "20"];
    let one = Command::new(env!("CARGO_BIN_EXE_dfl")).args(args).env("DFL_THREADS", "1").output().unwrap();
    let two = Command::new(env!("CARGO_BIN_EXE_dfl")).args(args).env("DFL_THREADS", "2").output().unwrap();
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn report_summarizes_runs() {
    let path = scratch("exp.json");
    let out = dfl(&["udt-exponents", "--n", "3", "--s", "4", "--report", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let out = dfl(&["report", path.to_str().unwrap()]);
    assert!(out.status.success());
    let rep = report(&out);
    assert_eq!(rep["results"]["runs"][0]["command"], "udt-exponents");
}
