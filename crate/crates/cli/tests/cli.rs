//! End-to-end tests of the `favtrial` binary: exit codes, file formats and
//! the pinned golden output of the `estimate` command.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_favtrial"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should run")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/fixture.csv")
}

fn json(output: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(output)).expect("stdout should be JSON")
}

#[test]
fn plan_probabilities_subdistribution() {
    let out = run(&[
        "plan", "--f1t", "0.7", "--f1c", "0.55", "--f2t", "0.1", "--f2c", "0.1", "--tau", "28",
        "--method", "subdistribution", "--format", "json",
    ]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    let n = v["plan"]["total_n"].as_u64().unwrap();
    assert!((n as i64 - 300).abs() <= 2, "N = {n}");
    assert!((v["effect_measures"]["subdistribution_hr"].as_f64().unwrap() - 1.51).abs() < 0.01);
}

#[test]
fn plan_medians_reproduces_published_size() {
    let out = run(&["plan", "--median-t", "12", "--median-c", "20", "--improve", "0.75"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("theta                1.67"), "{text}");
    let n: i64 = text
        .lines()
        .find(|l| l.contains("total N"))
        .and_then(|l| l.split_whitespace().nth(2))
        .and_then(|n| n.parse().ok())
        .unwrap();
    assert!((n - 160).abs() <= 2, "N = {n}");
}

#[test]
fn plan_missing_flags_is_usage_error() {
    let out = run(&["plan", "--f1t", "0.7", "--f1c", "0.55"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--f2t"));
}

#[test]
fn plan_mixed_modes_is_usage_error() {
    let out = run(&[
        "plan", "--f1t", "0.7", "--f1c", "0.55", "--f2t", "0.1", "--f2c", "0.1", "--median-t",
        "12", "--median-c", "20", "--improve", "0.75",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenario_table_presets() {
    let out = run(&["scenario-table", "--preset", "table1", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    assert_eq!(lines.len(), 16); // header + 15 rows
    assert!(lines[0].starts_with("h1_t,h1_c,h2_t,h2_c"));

    let out = run(&["scenario-table", "--preset", "table2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("474"), "{text}");

    let out = run(&["scenario-table", "--preset", "table9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenario_table_custom_file_and_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    std::fs::write(&path, "f1t,f1c,f2t,f2c\n0.6,0.6,0.2,0.2\n").unwrap();
    let out = run(&["scenario-table", "--file", path.to_str().unwrap(), "--format", "json"]);
    // Identical arms: planning sizes are undefined (unit ratios).
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(&path, "f1t,f1c,f2t,f2c\n0.6,0.5,0.2,0.2\n").unwrap();
    let out = run(&["scenario-table", "--file", path.to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["result"].as_array().unwrap().len(), 1);

    std::fs::write(&path, "f1t,f1c,f2t,f2c\n").unwrap();
    let out = run(&["scenario-table", "--file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_matches_golden_output() {
    let out = run(&["estimate", "--data", fixture().to_str().unwrap(), "--tau", "28"]);
    assert!(out.status.success());
    let golden = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/estimate_fixture.json"),
    )
    .unwrap();
    assert_eq!(stdout(&out), golden);
}

#[test]
fn estimate_writes_curve_csv() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("curves.csv");
    let out = run(&[
        "estimate", "--data", fixture().to_str().unwrap(), "--curves-csv",
        curves.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&curves).unwrap();
    assert!(text.starts_with("curve,arm,time,value\n"));
    assert!(text.contains("subdistribution_km,C,9,"));
}

#[test]
fn estimate_single_arm_skips_tests() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one_arm.csv");
    std::fs::write(&path, "id,arm,time,status\n1,T,5,1\n2,T,9,2\n3,T,28,0\n").unwrap();
    let out = run(&["estimate", "--data", path.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["arms"]["T"].is_object());
    assert!(v["arms"]["C"].is_null());
    assert!(v["tests"]["gray_subdistribution"].is_null());
    assert!(v["notes"][0].as_str().unwrap().contains("one arm"));
}

#[test]
fn estimate_identical_arms_has_unit_gray_p_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mirror.csv");
    let mut text = String::from("id,arm,time,status\n");
    for (i, (t, s)) in [(3.0, 1), (7.0, 2), (11.0, 1), (28.0, 0)].iter().enumerate() {
        text.push_str(&format!("t{i},T,{t},{s}\n"));
        text.push_str(&format!("c{i},C,{t},{s}\n"));
    }
    std::fs::write(&path, text).unwrap();
    let out = run(&["estimate", "--data", path.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["tests"]["gray_subdistribution"]["p_value"].as_f64(), Some(1.0));
    assert_eq!(v["tests"]["gray_subdistribution"]["statistic"].as_f64(), Some(0.0));
}

#[test]
fn estimate_rejects_malformed_csv_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.csv");
    std::fs::write(&path, "id,arm,time,status\n1,T,5,1\n2,X,9,2\n").unwrap();
    let out = run(&["estimate", "--data", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("arm"), "{err}");
}

#[test]
fn estimate_rejects_duplicate_ids() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.csv");
    std::fs::write(&path, "id,arm,time,status\n1,T,5,1\n1,C,9,2\n").unwrap();
    let out = run(&["estimate", "--data", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("duplicate id"));
}

#[test]
fn estimate_subdistribution_refusal_names_assumption() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("early_censor.csv");
    std::fs::write(
        &path,
        "id,arm,time,status\n1,T,5,1\n2,T,9,0\n3,C,4,1\n4,C,28,0\n",
    )
    .unwrap();
    // Without the flag: noted, not fatal.
    let out = run(&["estimate", "--data", path.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["arms"]["T"]["subdistribution_km"].is_null());
    assert!(v["notes"][0].as_str().unwrap().contains("censoring-complete"));

    let out = run(&[
        "estimate", "--data", path.to_str().unwrap(), "--require-subdistribution",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("censoring-complete"));
}

#[test]
fn simulate_inline_is_deterministic_given_seed() {
    let args = [
        "simulate", "--f1t", "0.7", "--f1c", "0.55", "--f2t", "0.1", "--f2c", "0.1",
        "--n-total", "60", "--replicates", "50", "--analysis", "gray-subdistribution",
        "--seed", "99",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let v = json(&a);
    assert_eq!(v["config"]["seed"], 99);
    assert_eq!(v["result"]["replicates"], 50);
}

#[test]
fn simulate_draws_and_echoes_seed_when_missing() {
    let out = run(&[
        "simulate", "--f1t", "0.7", "--f1c", "0.55", "--f2t", "0.1", "--f2c", "0.1",
        "--n-total", "40", "--replicates", "10", "--analysis", "binary-proportion",
    ]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("drew seed"));
    assert!(json(&out)["config"]["seed"].is_u64());
}

#[test]
fn simulate_audit_csv_has_one_row_per_replicate() {
    let dir = tempfile::tempdir().unwrap();
    let audit = dir.path().join("audit.csv");
    let out = run(&[
        "simulate", "--f1t", "0.7", "--f1c", "0.55", "--f2t", "0.1", "--f2c", "0.1",
        "--n-total", "40", "--replicates", "25", "--analysis", "event-specific-logrank",
        "--seed", "5", "--audit-csv", audit.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&audit).unwrap();
    assert_eq!(text.lines().count(), 26); // header + 25 replicates
    assert!(text.starts_with("replicate,p_value,reject,theta,final_n,fallback"));
}

#[test]
fn simulate_invalid_config_reports_location_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"n_total\": 50,\n").unwrap();
    let out = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"));
}

#[test]
fn ssr_sim_inline_runs_and_reports_final_sizes() {
    let out = run(&[
        "ssr-sim", "--f1t", "0.7", "--f1c", "0.55", "--f2t", "0.1", "--f2c", "0.1",
        "--n-total", "96", "--replicates", "40", "--analysis", "event-specific-logrank",
        "--n-max-cap", "400", "--required-events", "147.87", "--seed", "13",
    ]);
    assert!(out.status.success());
    let v = json(&out);
    let ssr = &v["result"]["ssr"];
    assert!(ssr["mean_final_n"].as_f64().unwrap() >= 96.0);
    assert!(ssr["max_final_n"].as_u64().unwrap() <= 400);
}
