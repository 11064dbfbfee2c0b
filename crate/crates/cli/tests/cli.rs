//! End-to-end checks of the `trainguard` binary.

use std::path::Path;
use std::process::{Command, Output};

fn trainguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trainguard")).args(args).output().unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

const SMALL_SUITE: &str = r#"{
    "tasks": {"lm": {"kind": "bigram_lm", "corpus_len": 2000}},
    "run": {"steps": 200, "eval_every": 100},
    "scenarios": [
        {"kind": "lr_stress", "lr": 40.0},
        {"kind": "seed_sweep", "lr": 1.0}
    ]
}"#;

#[test]
fn report_without_results_fails_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = trainguard(&["report", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["error"], "no_results");
}

#[test]
fn suite_report_rerenders_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    std::fs::write(&cfg, SMALL_SUITE).unwrap();
    let results = dir.path().join("results");
    let (cfg, results) = (cfg.to_str().unwrap(), results.to_str().unwrap());

    let suite = trainguard(&["--config", cfg, "--out", results, "suite"]);
    assert!(suite.status.success(), "{}", String::from_utf8_lossy(&suite.stderr));
    let report = trainguard(&["report", results]);
    assert!(report.status.success());
    let printed = String::from_utf8(suite.stdout).unwrap();
    let rendered = String::from_utf8(report.stdout).unwrap();
    assert!(printed.starts_with(&rendered), "suite output:\n{printed}\nreport:\n{rendered}");
    let written = std::fs::read(Path::new(results).join("report.md")).unwrap();
    assert_eq!(written, rendered.as_bytes());
    assert!(Path::new(results).join("config.resolved.json").is_file());
}

fn csv_without_wall(dir: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(dir.join("suite.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let wall = header.iter().position(|h| *h == "wall_s").unwrap();
    lines
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells.remove(wall);
            cells.join(",")
        })
        .collect()
}

#[test]
fn seeded_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = trainguard(&["--seed", "42", "--out", out.to_str().unwrap(), "--quiet", "run", "--steps", "300", "--lr", "30"]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        assert!(res.stdout.is_empty());
    }
    assert_eq!(csv_without_wall(&a), csv_without_wall(&b));
    let stem = "runs/run__guard__seed42.jsonl";
    assert_eq!(std::fs::read(a.join(stem)).unwrap(), std::fs::read(b.join(stem)).unwrap());
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"tasks": {"q": {"kind": "quadratic"}}, "guard": {"c_min": 0.0}}"#).unwrap();
    let out = trainguard(&["--config", cfg.to_str().unwrap(), "calibrate"]);
    assert!(!out.status.success());
    let err = stderr_json(&out);
    assert_eq!(err["error"], "invalid_config");
    assert!(err["message"].as_str().unwrap().contains("guard.c_min"), "{err}");
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = trainguard(&["--config", "/nonexistent/suite.json", "suite"]);
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["error"], "io");
}
