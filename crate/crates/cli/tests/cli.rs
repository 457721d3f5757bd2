//! End-to-end tests of the binary: every subcommand, the file formats it
//! reads and writes, flag/config interplay, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn stardisc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stardisc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf8 stdout")
}

#[test]
fn generate_writes_csv_to_stdout_and_file() {
    let out = stardisc(&["generate", "--points", "6", "--dim", "3", "--seed", "42"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(',').count() == 3));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    let filed = stardisc(&[
        "generate",
        "--points",
        "6",
        "--dim",
        "3",
        "--seed",
        "42",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(filed.status.success());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn generate_rejects_zero_points_with_code_2() {
    let out = stardisc(&["generate", "--points", "0", "--dim", "2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn witness_emits_verified_json_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    assert!(stardisc(&[
        "generate",
        "--points",
        "256",
        "--dim",
        "8",
        "--seed",
        "5",
        "--out",
        path.to_str().unwrap()
    ])
    .status
    .success());

    let out = stardisc(&["witness", path.to_str().unwrap(), "--rule", "threshold"]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(value["mode"], "main");
    assert!(value["excess"].as_f64().unwrap() >= 0.0);
    assert_eq!(value["trace"].as_array().unwrap().len(), 8);
}

#[test]
fn witness_rejects_missing_file_with_code_2() {
    let out = stardisc(&["witness", "/nonexistent/points.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exact_handles_boundary_points() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corner.csv");
    std::fs::write(&path, "1.0,1.0\n").unwrap();
    let out = stardisc(&["exact", path.to_str().unwrap()]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(value["d_star"].as_f64().unwrap(), 1.0);
    assert_eq!(value["side"], "underfilled");
}

#[test]
fn exact_budget_guard_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    assert!(stardisc(&[
        "generate",
        "--points",
        "50",
        "--dim",
        "3",
        "--seed",
        "1",
        "--out",
        path.to_str().unwrap()
    ])
    .status
    .success());
    let out = stardisc(&["exact", path.to_str().unwrap(), "--budget", "100"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn certify_coin_csv_has_expected_rows() {
    let out = stardisc(&[
        "certify",
        "--check",
        "coin",
        "--coin-max",
        "64",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,p_num,p_den,cutoff,tail_prob,bound,holds"
    );
    assert_eq!(lines.count(), 65);
}

#[test]
fn certify_all_emits_combined_json() {
    let out = stardisc(&[
        "certify",
        "--coin-max",
        "64",
        "--prob-min",
        "16",
        "--prob-max",
        "32",
        "--steps-max",
        "64",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(value["fair_coin_tail"]["all_hold"], true);
    assert_eq!(value["lower_tail"]["all_hold"], true);
    assert_eq!(value["proof_steps"]["central_binomial"]["violations"], 0);
}

#[test]
fn certify_all_with_csv_is_a_usage_error() {
    let out = stardisc(&["certify", "--format", "csv", "--coin-max", "8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_runs_from_flags_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let out = stardisc(&[
        "experiment",
        "--points",
        "64",
        "--dim",
        "4",
        "--trials",
        "10",
        "--seed",
        "7",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trials = std::fs::read_to_string(&path).unwrap();
    assert_eq!(trials.lines().count(), 1 + 10);
    let footer = std::fs::read_to_string(dir.path().join("report.summary.csv")).unwrap();
    assert!(footer.contains("mean_normalized_excess"));
}

#[test]
fn experiment_is_deterministic_across_runs() {
    let args = [
        "experiment",
        "--points",
        "64",
        "--dim",
        "4",
        "--trials",
        "20",
        "--seed",
        "11",
    ];
    let a: serde_json::Value = serde_json::from_str(&stdout_of(&stardisc(&args))).unwrap();
    let b: serde_json::Value = serde_json::from_str(&stdout_of(&stardisc(&args))).unwrap();
    let strip = |mut v: serde_json::Value| {
        v.as_object_mut().unwrap().remove("metadata");
        v
    };
    assert_eq!(strip(a), strip(b));
}

#[test]
fn experiment_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"n_points": 64, "dim": 4, "trials": 5, "base_seed": 1, "rule": "threshold"}"#,
    )
    .unwrap();
    let out = stardisc(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "3",
        "--rule",
        "greedy",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(value["config"]["trials"], 3);
    assert_eq!(value["config"]["rule"], "greedy");
    assert_eq!(value["config"]["n_points"], 64);
}

#[test]
fn experiment_rejects_dim_above_points_with_code_2() {
    let out = stardisc(&[
        "experiment",
        "--points",
        "8",
        "--dim",
        "9",
        "--trials",
        "2",
        "--seed",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tailscan_reports_fractions_and_monotonicity() {
    let out = stardisc(&[
        "tailscan", "--dims", "4,8", "--ratio", "64", "--trials", "200", "--seed", "13",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let value: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(value["entries"].as_array().unwrap().len(), 2);
    assert_eq!(value["non_increasing"], true);

    let plot = stardisc(&[
        "tailscan", "--dims", "4,8", "--ratio", "64", "--trials", "50", "--seed", "13", "--format",
        "plot",
    ]);
    assert!(plot.status.success());
    let text = stdout_of(&plot);
    assert!(text.starts_with("dim,tail_fraction,ci_low,ci_high"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn tailscan_needs_two_dims() {
    let out = stardisc(&["tailscan", "--dims", "8", "--trials", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn crossval_passes_on_small_instances() {
    let out = stardisc(&[
        "crossval", "--points", "16", "--dim", "2", "--trials", "25", "--seed", "3",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(value["violations"].as_array().unwrap().len(), 0);
    assert_eq!(value["trials"].as_array().unwrap().len(), 25);
}

#[test]
fn crossval_rejects_large_dim_with_code_2() {
    let out = stardisc(&["crossval", "--points", "64", "--dim", "4", "--trials", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_witness_exact_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("points.csv");
    let trace = dir.path().join("trace.json");
    assert!(stardisc(&[
        "generate",
        "--points",
        "24",
        "--dim",
        "2",
        "--seed",
        "99",
        "--out",
        points.to_str().unwrap()
    ])
    .status
    .success());
    assert!(stardisc(&[
        "witness",
        points.to_str().unwrap(),
        "--out",
        trace.to_str().unwrap()
    ])
    .status
    .success());
    let witness: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    let exact = stardisc(&["exact", points.to_str().unwrap()]);
    assert!(exact.status.success());
    let oracle: serde_json::Value = serde_json::from_str(&stdout_of(&exact)).unwrap();

    // the witness bound never beats the exact discrepancy
    let bound = witness["excess"].as_f64().unwrap() / 24.0;
    assert!(bound <= oracle["d_star"].as_f64().unwrap() + 1e-9);
    assert!(Path::new(&points).exists());
}
