use std::path::Path;
use std::process::{Command, Output};

fn deltakit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deltakit")).args(args).env_remove("DELTAKIT_SEED").output().unwrap()
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn fit_json_reports_both_families() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "fleiss.csv", "75,1,4\n5,4,1\n0,0,10\n");
    let out = deltakit(&["fit", &table, "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let delta = |i: usize| v["families"][i]["delta"].as_f64().unwrap();
    assert_eq!(format!("{:.3}", delta(0)), "0.687");
    assert_eq!(format!("{:.3}", delta(1)), "0.715");
}

#[test]
fn json_input_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "t.csv", "75,1,4\n5,4,1\n0,0,10\n");
    let json = write(dir.path(), "t.json", r#"{"cells": [[75,1,4],[5,4,1],[0,0,10]]}"#);
    assert_eq!(stdout(&deltakit(&["fit", &csv])), stdout(&deltakit(&["fit", &json])));
}

#[test]
fn two_by_two_gold_standard() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "np.csv", "80,10\n10,0\n");
    let out = deltakit(&["fit", &table, "--two-by-two", "--gold-standard", "rows"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("gold standard: rows"));
    let f1 = text.lines().find(|l| l.starts_with("F_1")).unwrap();
    assert!(f1.contains("0.765") && f1.contains("0.839"), "{f1}");
}

#[test]
fn non_square_table_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "bad.csv", "1,2,3,4\n1,2,3,4\n1,2,3,4\n");
    let out = deltakit(&["fit", &table]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("square"));
}

#[test]
fn two_by_two_flag_on_larger_table_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "t.csv", "75,1,4\n5,4,1\n0,0,10\n");
    assert_eq!(deltakit(&["fit", &table, "--two-by-two"]).status.code(), Some(2));
}

#[test]
fn unidentifiable_table_is_refitted_with_correction() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "pair.csv", "10,3,0\n2,10,0\n0,0,10\n");
    let out = deltakit(&["fit", &table]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("0.5 added"));
}

#[test]
fn unknown_setting_fails() {
    let out = deltakit(&["simulate", "--setting", "99", "--replicates", "10"]);
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn missing_file_fails() {
    assert_eq!(deltakit(&["fit", "/nonexistent/table.csv"]).status.code(), Some(3));
}

#[test]
fn simulation_is_reproducible() {
    let args = ["simulate", "--setting", "3", "--replicates", "100", "--seed", "17", "--format", "csv"];
    let a = deltakit(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&deltakit(&args)));
    let seeded = Command::new(env!("CARGO_BIN_EXE_deltakit"))
        .args(["simulate", "--setting", "3", "--replicates", "100", "--format", "csv"])
        .env("DELTAKIT_SEED", "17")
        .output()
        .unwrap();
    assert_eq!(stdout(&a), stdout(&seeded));
}

#[test]
fn simulation_from_setting_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "s.json",
        r#"{"n": 40, "alpha": [0.1, 0.1, 0.2], "pi1": [0.3, 0.3, 0.4], "pi2": [0.3, 0.3, 0.4]}"#,
    );
    let out = deltakit(&["simulate", "--setting-file", &file, "--replicates", "50", "--target", "delta", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert!((v[0]["truth"].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn presets_lists_every_setting() {
    let out = deltakit(&["presets", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 49);
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("1,1,3,30,0.4000,0.4000,0.0280"), "{first}");
}
