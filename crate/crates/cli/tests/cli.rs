use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn dw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dw"))
        .args(args)
        .output()
        .expect("dw runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = dw(args);
    assert!(
        out.status.success(),
        "dw {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    assert_eq!(v["schema"], "dw/1");
    v
}

fn num(v: &Value) -> f64 {
    match v {
        Value::String(s) => s.parse().expect("numeric string"),
        other => other.as_f64().expect("number"),
    }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dw-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const ENERGY_A1: [&str; 13] = [
    "energy", "--a", "1", "--parity", "even", "--D", "4.33441", "--A", "-9.23456", "--alpha", "2.74573", "--K", "2",
];

#[test]
fn energy_at_unit_coupling() {
    let v = json_ok(&ENERGY_A1);
    assert!((num(&v["E_var"]) - 1.607541302594).abs() < 1e-7);
    let e2 = num(&v["E"][1]);
    assert!(((e2 - -1.2552e-10) / 1.2552e-10).abs() < 0.02, "{e2:e}");
    assert!(v["err_est"].is_string());
}

#[test]
fn identical_invocations_are_bit_identical() {
    let a = dw(&ENERGY_A1);
    let b = dw(&ENERGY_A1);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn doubling_precision_stays_within_error_estimate() {
    let lo = json_ok(&ENERGY_A1);
    let mut args = ENERGY_A1.to_vec();
    args.extend(["--precision", "384"]);
    let hi = json_ok(&args);
    let err = num(&lo["err_est"]);
    for k in 0..2 {
        let d = (num(&lo["partial_sums"][k]) - num(&hi["partial_sums"][k])).abs();
        assert!(d <= err, "order {k}: change {d:e} vs estimate {err:e}");
    }
}

#[test]
fn instanton_leading_term() {
    let v = json_ok(&["instanton", "--a", "-20", "--order", "0"]);
    assert_eq!(v["value"], "1.12154e-7");
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn instanton_deviations_against_supplied_gap() {
    let v = json_ok(&["instanton", "--a", "-20", "--reference-gap", "1.06525e-7"]);
    let d0 = num(&v["rows"][0]["deviation"]);
    assert!((d0 - 0.0528).abs() < 1e-3, "{d0}");
}

#[test]
fn rescale_identity() {
    let v = json_ok(&["rescale", "--m2", "0", "--g", "2"]);
    assert_eq!(num(&v["a"]), 0.0);
    assert_eq!(num(&v["energy_scale"]), 1.0);
    let back = json_ok(&["rescale", "--a", "-3.523390749", "--g", "1"]);
    assert!((num(&back["m2"]) - -2.2195970861).abs() < 1e-8);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = dw(&["energy", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_value_reports_json_and_exits_one() {
    let out = dw(&["instanton", "--a", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "domain");
}

#[test]
fn numerical_failure_exits_two() {
    let out = dw(&["critical", "--lo", "-2", "--hi", "-1", "--precision", "96"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["schema"], "dw/1");
    assert_eq!(v["error"], "bracket");
}

#[test]
fn reference_writes_eigenfunction_csv() {
    let dir = scratch("reference");
    let path = dir.join("psi.csv");
    let v = json_ok(&["reference", "--a", "1", "--out", path.to_str().unwrap()]);
    assert!((num(&v["E"]) - 1.607541302469).abs() < 1e-9);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("x,value\n"));
    assert!(text.lines().count() > 100);
}

#[test]
fn reference_in_symanzik_frame() {
    let v = json_ok(&["reference", "--m2", "0", "--g", "2"]);
    let w = json_ok(&["reference", "--a", "0"]);
    assert!((num(&v["E"]) - num(&w["E"])).abs() < 1e-12);
}

#[test]
fn curves_write_csv_files() {
    let dir = scratch("curves");
    let v = json_ok(&[
        "curves", "--a", "-1", "--A", "-12.4816", "--D", "4.059888", "--alpha", "3.07041", "--K", "2", "--count", "50",
        "--out", dir.to_str().unwrap(),
    ]);
    let files = v["files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        let text = std::fs::read_to_string(f.as_str().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,value"));
        assert_eq!(lines.count(), 51);
    }
}

#[test]
fn deviation_needs_parameters() {
    let out = dw(&["deviation", "--a", "1"]);
    assert_eq!(out.status.code(), Some(1));
}
