use std::io::Write;

use serde_json::Value;
use ulc_cli::run_cli;

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("ulc").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn temp_json(name: &str, body: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("ulc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::File::create(&path)
        .unwrap()
        .write_all(body.as_bytes())
        .unwrap();
    path
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&[]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["extremal", "--mean", "1"]).0, 2);
    assert_eq!(run(&["extremal", "--mean", "1", "--support", "10", "--bogus"]).0, 2);
    assert_eq!(run(&["extremal", "--mean", "x", "--support", "10"]).0, 2);
    assert_eq!(run(&["extremal", "--mean", "1", "--support", "10", "--emit", "xml"]).0, 2);
}

#[test]
fn input_errors_exit_two_with_location() {
    let path = temp_json("bad.json", "{\"offset\": 0,\n");
    let (code, out, err) = run(&["validate", "--input", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("bad.json:2:"), "{err}");

    let missing = run(&["validate", "--input", "/nonexistent/seq.json"]);
    assert_eq!(missing.0, 2);

    let unknown = temp_json("unknown.json", r#"{"offset": 0, "values": [1], "extra": 1}"#);
    assert_eq!(run(&["validate", "--input", unknown.to_str().unwrap()]).0, 2);

    let negative = temp_json("neg.json", r#"{"offset": 0, "values": [1, -1, 1]}"#);
    assert_eq!(run(&["validate", "--input", negative.to_str().unwrap()]).0, 2);
}

#[test]
fn infeasible_requests_exit_two() {
    assert_eq!(run(&["extremal", "--mean", "11", "--support", "10"]).0, 2);
    assert_eq!(run(&["family", "--k", "3", "--l", "2", "--x", "1"]).0, 2);
    assert_eq!(run(&["family", "--k", "0", "--l", "2", "--x", "-1"]).0, 2);
}

#[test]
fn validate_log_concave_pmf_reports_ulc() {
    let path = temp_json(
        "binom.json",
        r#"{"offset": 0, "values": [0.25, 0.5, 0.25], "kind": "pmf"}"#,
    );
    let (code, out, _) = run(&["validate", "--input", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["is_log_concave"], true);
    assert_eq!(v["ulc_inf"], true);
    assert_eq!(v["worst_margin"], 0.75);
}

#[test]
fn gap_margin_serializes_as_null() {
    let path = temp_json("gap.json", r#"{"offset": 0, "values": [1, 0, 1]}"#);
    let (code, out, _) = run(&["validate", "--input", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["contiguous"], false);
    assert!(v["worst_margin"].is_null());
}

#[test]
fn extremal_json_matches_closed_form() {
    let (code, out, _) = run(&["extremal", "--mean", "1", "--support", "2"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["best_k"], 0);
    assert_eq!(v["best_l"], 2);
    let p = v["min_prob"].as_f64().unwrap();
    assert!((p - (2f64.sqrt() - 1.0)).abs() < 1e-12);
}

#[test]
fn extremal_csv_is_header_plus_row() {
    let (code, out, _) = run(&["extremal", "--mean", "1", "--support", "10", "--emit", "csv"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "n0,L,k,l,x0,min_prob,poisson_prob,gap");
    let fields: Vec<&str> = lines[1].split(',').collect();
    let min_prob: f64 = fields[5].parse().unwrap();
    let gap: f64 = fields[7].parse().unwrap();
    assert!((min_prob - 0.3678794).abs() < 1e-6);
    assert!((0.0..=1e-7).contains(&gap));
}

#[test]
fn dof_and_family_outputs() {
    let path = temp_json("geo.json", r#"{"offset": 0, "values": [1, 0.5, 0.25, 0.125]}"#);
    let (code, out, _) = run(&["dof", "--input", path.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["basis"].as_array().unwrap().len(), 2);
    assert_eq!(v["reflected"], false);

    let (code, out, _) = run(&["family", "--k", "0", "--l", "5", "--x", "2"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["profile"]["claim1"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_and_suite_pass() {
    let (code, out, _) = run(&["verify", "--mean", "2", "--support", "15", "--trials", "1000", "--seed", "7"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["violations"], 0);

    let (code, out, _) = run(&["suite", "--support", "8", "--trials", "100", "--seed", "1", "--emit", "csv"]);
    assert_eq!(code, 0);
    assert!(out.lines().count() >= 2);
}
