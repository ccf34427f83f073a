//! End-to-end tests of the `faircam` binary: exit codes, output artifacts,
//! and byte-level determinism across invocations and thread counts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_faircam"))
}

fn scenario(name: &str) -> String {
    format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("faircam-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn validate_ok_scenario_exits_zero() {
    let out = run(&["validate", "--scenario", &scenario("hospital_medium.json")]);
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("hospital_medium"), "{stdout}");
}

#[test]
fn validate_broken_scenario_exits_one() {
    let dir = tmpdir("invalid");
    let path = dir.join("bad.json");
    // Edge referencing an undeclared agent.
    let text = read(Path::new(&scenario("hospital_weak.json")))
        .replace("\"source\": \"legacy_firewall\"", "\"source\": \"LEC99\"");
    fs::write(&path, text).unwrap();
    let out = run(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("LEC99"), "{stdout}");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_file_is_a_validation_failure() {
    let out = run(&["validate", "--scenario", "/nonexistent/nope.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_error_prints_help_and_fails() {
    let out = run(&["frobnicate"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");
}

#[test]
fn run_with_trace_export_writes_the_document() {
    let dir = tmpdir("trace");
    let out = run(&[
        "run",
        "--scenario",
        &scenario("hospital_weak.json"),
        "--seed",
        "50",
        "--horizon",
        "4000",
        "--export-trace",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let trace = read(&dir.join("trace_seed50.json"));
    let doc: serde_json::Value = serde_json::from_str(&trace).unwrap();
    assert_eq!(doc["seed"], 50);
    assert_eq!(doc["horizon"], 4000);
    assert!(doc["ledger"]["events"].as_array().unwrap().len() > 10);
    assert!(doc["chains"].is_array());
    assert!(doc["cascade_windows"].is_array());
    assert!(doc["completeness"]["failed"].as_array().unwrap().is_empty());
    // No stray temp file left behind.
    assert!(!dir.join("trace_seed50.json.tmp").exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn trace_subcommand_matches_run_export() {
    let dir_a = tmpdir("trace-a");
    let dir_b = tmpdir("trace-b");
    let ok = run(&[
        "trace",
        "--scenario",
        &scenario("hospital_weak.json"),
        "--seed",
        "3",
        "--horizon",
        "3000",
        "--out",
        dir_a.to_str().unwrap(),
    ]);
    assert!(ok.status.success());
    let ok = run(&[
        "run",
        "--scenario",
        &scenario("hospital_weak.json"),
        "--seed",
        "3",
        "--horizon",
        "3000",
        "--export-trace",
        "--out",
        dir_b.to_str().unwrap(),
    ]);
    assert!(ok.status.success());
    assert_eq!(read(&dir_a.join("trace_seed3.json")), read(&dir_b.join("trace_seed3.json")));
    fs::remove_dir_all(&dir_a).unwrap();
    fs::remove_dir_all(&dir_b).unwrap();
}

#[test]
fn batch_outputs_are_deterministic_across_jobs() {
    let dir_a = tmpdir("batch-a");
    let dir_b = tmpdir("batch-b");
    for (dir, jobs) in [(&dir_a, "1"), (&dir_b, "8")] {
        let out = run(&[
            "batch",
            "--scenario",
            &scenario("hospital_medium.json"),
            "--seeds",
            "0..23",
            "--jobs",
            jobs,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{out:?}");
    }
    for file in [
        "batch_iterations.csv",
        "batch_summary.json",
        "loss_cdf.csv",
        "loss_exceedance.csv",
        "queue_depth_bands.csv",
        "funnel.csv",
        "divergence.csv",
    ] {
        assert_eq!(
            read(&dir_a.join(file)),
            read(&dir_b.join(file)),
            "{file} differs between --jobs 1 and --jobs 8"
        );
    }
    let csv = read(&dir_a.join("batch_iterations.csv"));
    assert!(csv.starts_with("seed,total_loss,breaches,contacts,avoided,deterred,resisted"));
    assert_eq!(csv.lines().count(), 25, "header plus 24 seeds");
    fs::remove_dir_all(&dir_a).unwrap();
    fs::remove_dir_all(&dir_b).unwrap();
}

#[test]
fn batch_json_format_replaces_the_csv_table() {
    let dir = tmpdir("batch-json");
    let out = run(&[
        "batch",
        "--scenario",
        &scenario("hospital_weak.json"),
        "--seeds",
        "0..4",
        "--horizon",
        "2000",
        "--format",
        "json",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(!dir.join("batch_iterations.csv").exists());
    let rows: serde_json::Value =
        serde_json::from_str(&read(&dir.join("batch_iterations.json"))).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5);
    assert_eq!(rows[0]["seed"], 0);
    assert!(rows[0]["per_control"].is_object());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_writes_one_row_per_level() {
    let dir = tmpdir("sweep");
    let out = run(&[
        "sweep",
        "--scenario",
        &scenario("hospital_medium.json"),
        "--factor",
        "budget_hours",
        "--levels",
        "2,5,10,20,40,80,160",
        "--seeds",
        "0..9",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let csv = read(&dir.join("sweep.csv"));
    assert_eq!(csv.lines().count(), 8, "header plus 7 levels:\n{csv}");
    let json: serde_json::Value = serde_json::from_str(&read(&dir.join("sweep.json"))).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 7);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_sweep_factor_is_a_runtime_error() {
    let out = run(&[
        "sweep",
        "--scenario",
        &scenario("hospital_medium.json"),
        "--factor",
        "threat_rate",
        "--levels",
        "1,2",
        "--seeds",
        "0..1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("threat_rate"), "{stderr}");
}
