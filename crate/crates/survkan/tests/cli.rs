//! End-to-end runs of the `survkan` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn survkan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_survkan")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = survkan(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

const SMALL_CONFIG: &str = r#"{
  "learning_rate": 0.05, "steps": 40, "lambda": 0.002, "lambda_ent": 2.0,
  "grid": 4, "base_kind": "identity", "early_stopping": false,
  "prune_threshold": 0.02, "hidden": [2], "seed": 1
}"#;

fn small_dataset(dir: &Path) {
    ok(&["generate", "--formula", "gaussian", "--n-train", "600", "--n-test", "300", "--seed", "3", "--out", p(dir)]);
}

#[test]
fn generate_writes_the_requested_rows_byte_stably() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&["generate", "--formula", "gaussian", "--n-train", "8000", "--n-test", "2000", "--seed", "7", "--out", p(dir)]);
    }
    assert_eq!(data_rows(&a.join("train.csv")), 8000);
    assert_eq!(data_rows(&a.join("test.csv")), 2000);
    assert!(a.join("meta.json").exists());
    for f in ["train.csv", "test.csv", "meta.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
}

#[test]
fn bad_formulas_are_usage_errors_before_any_file() {
    let tmp = tempfile::tempdir().unwrap();
    for formula in ["custom:x1+bad(", "quadratic", "linear:1,x"] {
        let out_dir = tmp.path().join("out");
        let out = survkan(&["generate", "--formula", formula, "--n-train", "10", "--n-test", "10", "--seed", "1", "--out", p(&out_dir)]);
        assert_eq!(out.status.code(), Some(2), "{formula}");
        assert!(!out_dir.exists(), "{formula} left files behind");
    }
}

#[test]
fn missing_flags_are_usage_errors() {
    assert_eq!(survkan(&["train"]).status.code(), Some(2));
    assert_eq!(survkan(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn symbolic_before_train_names_the_missing_step() {
    let tmp = tempfile::tempdir().unwrap();
    small_dataset(tmp.path());
    let model = tmp.path().join("model.json");
    let out = survkan(&["symbolic", "--model", p(&model), "--train", p(&tmp.path().join("train.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("survkan train"));
}

#[test]
fn bad_event_value_is_a_data_error_naming_the_row() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bad.csv");
    fs::write(&csv, "age,duration,event\n50,3.0,1\n61,2.5,2\n").unwrap();
    let out = survkan(&["train", "--train", p(&csv), "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2") && err.contains("event"), "{err}");
}

#[test]
fn full_pipeline_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_dataset(dir);
    let cfg = dir.join("config.json");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    let (train, test) = (dir.join("train.csv"), dir.join("test.csv"));
    let (m1, m2) = (dir.join("m1"), dir.join("m2"));
    for m in [&m1, &m2] {
        ok(&["train", "--train", p(&train), "--config", p(&cfg), "--out", p(m)]);
    }
    assert_eq!(fs::read(m1.join("model.json")).unwrap(), fs::read(m2.join("model.json")).unwrap());
    assert_eq!(data_rows(&m1.join("history.csv")), 40);

    let model = m1.join("model.json");
    let out = survkan(&["plot", "--model", p(&model), "--train", p(&train), "--out", p(&dir.join("svg")), "--stage", "symbolic"]);
    assert_eq!(out.status.code(), Some(2), "plotting the symbolic stage needs `symbolic` first");

    ok(&["symbolic", "--model", p(&model), "--train", p(&train), "--export-samples", p(&dir.join("samples"))]);
    let text = fs::read_to_string(m1.join("formula.txt")).unwrap();
    assert!(!text.trim().is_empty());
    let formula: serde_json::Value = serde_json::from_slice(&fs::read(m1.join("formula.json")).unwrap()).unwrap();
    assert_eq!(formula["text"].as_str().unwrap(), text.trim_end());

    let (r1, r2) = (dir.join("r1.json"), dir.join("r2.json"));
    for r in [&r1, &r2] {
        ok(&["evaluate", "--model", p(&model), "--test", p(&test), "--bootstrap", "200", "--seed", "3", "--out", p(r)]);
    }
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&r1).unwrap()).unwrap();
    let stages: Vec<&str> = report["stages"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["trained", "pruned", "symbolic"]);
    for s in report["stages"].as_array().unwrap() {
        let (c, lo, hi) = (s["c_index"].as_f64().unwrap(), s["ci_low"].as_f64().unwrap(), s["ci_high"].as_f64().unwrap());
        assert!(lo <= hi && (0.0..=1.0).contains(&c));
    }
    assert!(report["true_c_index"].as_f64().is_some());
    assert_eq!(report["formula"].as_str().unwrap(), text.trim_end());

    let svg_dir = dir.join("svg");
    ok(&["plot", "--model", p(&model), "--train", p(&train), "--out", p(&svg_dir), "--stage", "symbolic"]);
    let svgs = fs::read_dir(&svg_dir).unwrap().count();
    let samples = fs::read_dir(dir.join("samples")).unwrap().count();
    assert!(svgs > 0);
    assert_eq!(svgs, samples, "one plot and one sample file per active edge");
    let timing: serde_json::Value = serde_json::from_slice(&fs::read(m1.join("timing.json")).unwrap()).unwrap();
    for key in ["train", "symbolic", "plot"] {
        assert!(timing[key].as_f64().is_some(), "{key} timing missing");
    }
}

#[test]
fn search_results_do_not_depend_on_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["generate", "--formula", "linear", "--n-train", "300", "--n-test", "50", "--seed", "4", "--out", p(dir)]);
    let space = dir.join("space.json");
    fs::write(&space, r#"{"steps": 15, "hidden_layers": [0, 1], "width": [1, 3], "grid": [3]}"#).unwrap();
    let train = dir.join("train.csv");
    for (jobs, out) in [("1", "s1"), ("2", "s2")] {
        ok(&[
            "search", "--train", p(&train), "--space", p(&space), "--trials", "3", "--folds", "2", "--seed", "5", "--jobs", jobs,
            "--out", p(&dir.join(out)),
        ]);
    }
    for f in ["leaderboard.csv", "best_config.json"] {
        assert_eq!(fs::read(dir.join("s1").join(f)).unwrap(), fs::read(dir.join("s2").join(f)).unwrap(), "{f}");
    }
    assert_eq!(data_rows(&dir.join("s1/leaderboard.csv")), 3);
    let best = dir.join("s1/best_config.json");
    ok(&["train", "--train", p(&train), "--config", p(&best), "--out", p(&dir.join("best"))]);
}

#[test]
fn categorical_columns_train_and_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut train = String::from("site,age,duration,event\n");
    let mut test = train.clone();
    for i in 0..200 {
        let site = ["FH", "UH", "GH"][i % 3];
        let age = (i * 37 % 100) as f64 / 10.0;
        let t = 1.0 + ((i * 53) % 97) as f64 / (1.0 + age);
        let line = format!("{site},{age},{t},{}\n", (i % 4 != 0) as u8);
        if i < 150 { train.push_str(&line) } else { test.push_str(&line) }
    }
    fs::write(dir.join("train.csv"), train).unwrap();
    fs::write(dir.join("test.csv"), test).unwrap();
    let cfg = dir.join("config.json");
    fs::write(&cfg, r#"{"steps": 20, "early_stopping": false, "prune_threshold": 0.0}"#).unwrap();
    let m = dir.join("m");
    ok(&[
        "train", "--train", p(&dir.join("train.csv")), "--config", p(&cfg), "--out", p(&m), "--categorical", "site",
        "--standardize",
    ]);
    let model: serde_json::Value = serde_json::from_slice(&fs::read(m.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["columns"][0]["kind"]["labels"], serde_json::json!(["FH", "UH", "GH"]));
    ok(&["evaluate", "--model", p(&m.join("model.json")), "--test", p(&dir.join("test.csv")), "--bootstrap", "50"]);
    assert!(m.join("report.json").exists());
}
