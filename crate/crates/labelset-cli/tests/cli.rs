//! End-to-end tests driving the built binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_labelset")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let output = Command::new(binary())
        .args(args)
        .output()
        .expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).to_string(),
        String::from_utf8_lossy(&output.stderr).to_string(),
    )
}

fn assert_ok(args: &[&str]) {
    let (code, stdout, stderr) = run(args);
    assert_eq!(code, 0, "args {args:?}\nstdout:\n{stdout}\nstderr:\n{stderr}");
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

/// Two well-separated classes in one dimension.
fn separated_csv(n_per_class: usize) -> String {
    let mut out = String::from("x,group\n");
    for i in 0..n_per_class {
        out.push_str(&format!("{},low\n", i as f64 * 0.05));
        out.push_str(&format!("{},high\n", 10.0 + i as f64 * 0.05));
    }
    out
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        files.insert(
            entry.file_name().to_string_lossy().to_string(),
            std::fs::read(entry.path()).unwrap(),
        );
    }
    files
}

struct Paths {
    train: PathBuf,
    test: PathBuf,
    out_fit: PathBuf,
    out_cal: PathBuf,
}

fn pipeline_paths(root: &Path) -> Paths {
    Paths {
        train: root.join("train.csv"),
        test: root.join("test.csv"),
        out_fit: root.join("fit"),
        out_cal: root.join("cal"),
    }
}

#[test]
fn pipeline_runs_and_rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths = pipeline_paths(dir.path());
    write(&paths.train, &separated_csv(20));
    write(&paths.test, &separated_csv(6));

    assert_ok(&[
        "fit",
        "--data",
        paths.train.to_str().unwrap(),
        "--label-col",
        "group",
        "--estimator",
        "knn",
        "--k",
        "3",
        "--split-frac",
        "0.5",
        "--seed",
        "7",
        "--out",
        paths.out_fit.to_str().unwrap(),
    ]);
    let model = paths.out_fit.join("model.txt");
    assert!(model.exists());

    assert_ok(&[
        "calibrate",
        "--data",
        paths.train.to_str().unwrap(),
        "--label-col",
        "group",
        "--model",
        model.to_str().unwrap(),
        "--coverage-mode",
        "class",
        "--alpha",
        "0.2",
        "--method",
        "conformal",
        "--split-frac",
        "0.5",
        "--seed",
        "7",
        "--out",
        paths.out_cal.to_str().unwrap(),
    ]);
    let thresholds = paths.out_cal.join("thresholds.txt");
    assert!(thresholds.exists());

    let out_pred = dir.path().join("pred");
    assert_ok(&[
        "predict",
        "--data",
        paths.test.to_str().unwrap(),
        "--label-col",
        "group",
        "--model",
        model.to_str().unwrap(),
        "--thresholds",
        thresholds.to_str().unwrap(),
        "--complete",
        "fill",
        "--out",
        out_pred.to_str().unwrap(),
    ]);
    let predictions = std::fs::read_to_string(out_pred.join("predictions.csv")).unwrap();
    assert!(predictions.starts_with("row,members,set_size,bitmask\n"));
    assert_eq!(predictions.lines().count(), 1 + 12);

    let out_eval = dir.path().join("eval");
    assert_ok(&[
        "evaluate",
        "--data",
        paths.test.to_str().unwrap(),
        "--label-col",
        "group",
        "--model",
        model.to_str().unwrap(),
        "--thresholds",
        thresholds.to_str().unwrap(),
        "--out",
        out_eval.to_str().unwrap(),
    ]);
    for name in ["predictions.csv", "metrics.csv", "cooccurrence.csv", "report.txt"] {
        assert!(out_eval.join(name).exists(), "{name} missing");
    }

    // Replaying each recorded config must reproduce the outputs exactly.
    for out in [&paths.out_fit, &paths.out_cal, &out_pred, &out_eval] {
        let before = snapshot(out);
        let config = out.join("run_config.txt");
        let config_copy = dir.path().join("rerun_config.txt");
        std::fs::copy(&config, &config_copy).unwrap();
        std::fs::remove_dir_all(out).unwrap();
        assert_ok(&["rerun", "--config", config_copy.to_str().unwrap()]);
        let after = snapshot(out);
        assert_eq!(before, after, "rerun changed outputs under {}", out.display());
    }
}

#[test]
fn include_all_thresholds_predict_every_class() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    write(&train, &separated_csv(10));
    let out_fit = dir.path().join("fit");
    assert_ok(&[
        "fit",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "group",
        "--estimator",
        "knn",
        "--k",
        "1",
        "--out",
        out_fit.to_str().unwrap(),
    ]);

    let thresholds = dir.path().join("sentinel.txt");
    write(
        &thresholds,
        "labelset-thresholds v1\nmode class-specific\nmethod manual\nentries INCLUDE_ALL INCLUDE_ALL\nend\n",
    );
    let out_pred = dir.path().join("pred");
    assert_ok(&[
        "predict",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "group",
        "--model",
        out_fit.join("model.txt").to_str().unwrap(),
        "--thresholds",
        thresholds.to_str().unwrap(),
        "--out",
        out_pred.to_str().unwrap(),
    ]);
    let predictions = std::fs::read_to_string(out_pred.join("predictions.csv")).unwrap();
    for line in predictions.lines().skip(1) {
        assert!(line.ends_with(",high;low,2,3"), "unexpected row {line:?}");
    }
}

#[test]
fn evaluate_reproduces_hand_counts() {
    // knn with k = 2 over two tight clusters; the middle query sits between
    // them, so the sets are {1}, {1,2}, {2} with labels (1, 1, 2).
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    write(&train, "x,y\n0.0,a\n0.1,a\n10.0,b\n10.1,b\n");
    let test = dir.path().join("test.csv");
    write(&test, "x,y\n0.0,a\n5.05,a\n10.0,b\n");

    let out_fit = dir.path().join("fit");
    assert_ok(&[
        "fit",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "y",
        "--estimator",
        "knn",
        "--k",
        "2",
        "--out",
        out_fit.to_str().unwrap(),
    ]);
    let thresholds = dir.path().join("manual.txt");
    write(
        &thresholds,
        "labelset-thresholds v1\nmode class-specific\nmethod manual\nentries 0.5 0.5\nend\n",
    );
    let out_eval = dir.path().join("eval");
    assert_ok(&[
        "evaluate",
        "--data",
        test.to_str().unwrap(),
        "--label-col",
        "y",
        "--model",
        out_fit.join("model.txt").to_str().unwrap(),
        "--thresholds",
        thresholds.to_str().unwrap(),
        "--out",
        out_eval.to_str().unwrap(),
    ]);

    let metrics = std::fs::read_to_string(out_eval.join("metrics.csv")).unwrap();
    assert!(metrics.contains("class_coverage,a,1\n"), "{metrics}");
    assert!(metrics.contains("class_coverage,b,1\n"), "{metrics}");
    assert!(metrics.contains(&format!("ambiguity,,{}\n", 4.0 / 3.0)), "{metrics}");
    assert!(metrics.contains("null_fraction,,0\n"), "{metrics}");

    let matrix = std::fs::read_to_string(out_eval.join("cooccurrence.csv")).unwrap();
    assert_eq!(matrix, "class,a,b\na,2,1\nb,1,2\n");

    let predictions = std::fs::read_to_string(out_eval.join("predictions.csv")).unwrap();
    let rows: Vec<&str> = predictions.lines().skip(1).collect();
    assert_eq!(rows, vec!["0,a,1,1", "1,a;b,2,3", "2,b,1,2"]);
}

#[test]
fn logistic_with_zero_iterations_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    write(&train, &separated_csv(10));
    let out_fit = dir.path().join("fit");
    assert_ok(&[
        "fit",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "group",
        "--estimator",
        "logistic",
        "--max-iter",
        "0",
        "--out",
        out_fit.to_str().unwrap(),
    ]);

    // Uniform posteriors are 0.5 each; a 0.4 cut admits both classes.
    let thresholds = dir.path().join("manual.txt");
    write(
        &thresholds,
        "labelset-thresholds v1\nmode total\nmethod manual\nentries 0.4\nend\n",
    );
    let out_pred = dir.path().join("pred");
    assert_ok(&[
        "predict",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "group",
        "--model",
        out_fit.join("model.txt").to_str().unwrap(),
        "--thresholds",
        thresholds.to_str().unwrap(),
        "--out",
        out_pred.to_str().unwrap(),
    ]);
    let predictions = std::fs::read_to_string(out_pred.join("predictions.csv")).unwrap();
    for line in predictions.lines().skip(1) {
        assert!(line.ends_with(",high;low,2,3"), "unexpected row {line:?}");
    }
}

#[test]
fn oracle_example3_accretive_emits_trace_raster_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oracle");
    assert_ok(&[
        "oracle",
        "example3",
        "--coverage",
        "0.95",
        "--complete",
        "accretive",
        "--mc",
        "2000",
        "--seed",
        "1",
        "--raster-res",
        "40",
        "--out",
        out.to_str().unwrap(),
    ]);
    for name in [
        "thresholds.txt",
        "accretive_trace.csv",
        "raster.csv",
        "summary.txt",
        "run_config.txt",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let trace = std::fs::read_to_string(out.join("accretive_trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,chosen_class,t_1,t_2,t_3,ambiguity,sum_t\n"));
    let raster = std::fs::read_to_string(out.join("raster.csv")).unwrap();
    assert_eq!(raster.lines().count(), 1 + 40 * 40);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("oracle ambiguity"), "{summary}");

    // The oracle path is seeded end to end, so a rerun reproduces it too.
    let before = snapshot(&out);
    let config_copy = dir.path().join("config.txt");
    std::fs::copy(out.join("run_config.txt"), &config_copy).unwrap();
    std::fs::remove_dir_all(&out).unwrap();
    assert_ok(&["rerun", "--config", config_copy.to_str().unwrap()]);
    assert_eq!(before, snapshot(&out));
}

#[test]
fn oracle_example1_coverage_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve");
    assert_ok(&[
        "oracle",
        "example1",
        "--coverage",
        "0.9",
        "--coverage-mode",
        "total",
        "--mc",
        "2000",
        "--curve",
        "0.5,0.7,0.9",
        "--out",
        out.to_str().unwrap(),
    ]);
    let curve = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("total_coverage,cov_1,cov_2"));
    assert_eq!(curve.lines().count(), 4);
    assert!(!out.join("raster.csv").exists(), "1-D preset has no raster");
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    write(&train, &separated_csv(10));
    let out_fit = dir.path().join("fit");
    assert_ok(&[
        "fit",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "group",
        "--estimator",
        "knn",
        "--k",
        "2",
        "--out",
        out_fit.to_str().unwrap(),
    ]);
    let model = out_fit.join("model.txt");

    // Missing label column: data error.
    let (code, _, stderr) = run(&[
        "fit",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "species",
        "--estimator",
        "knn",
        "--k",
        "2",
        "--out",
        dir.path().join("x1").to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("species"), "{stderr}");

    // Alpha list length mismatch: validation error.
    let (code, _, stderr) = run(&[
        "calibrate",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "group",
        "--model",
        model.to_str().unwrap(),
        "--coverage-mode",
        "class",
        "--alpha",
        "0.1,0.1,0.1",
        "--method",
        "plugin",
        "--out",
        dir.path().join("x2").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{stderr}");

    // Conformal without a split plan: validation error.
    let (code, _, _) = run(&[
        "calibrate",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "group",
        "--model",
        model.to_str().unwrap(),
        "--coverage-mode",
        "total",
        "--alpha",
        "0.1",
        "--method",
        "conformal",
        "--out",
        dir.path().join("x3").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);

    // Model fitted on all rows cannot be conformally calibrated on a split.
    let (code, _, stderr) = run(&[
        "calibrate",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "group",
        "--model",
        model.to_str().unwrap(),
        "--coverage-mode",
        "total",
        "--alpha",
        "0.1",
        "--method",
        "conformal",
        "--split-frac",
        "0.5",
        "--seed",
        "3",
        "--out",
        dir.path().join("x4").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("fingerprint"), "{stderr}");

    // Version-tampered artifact: artifact-version error.
    let tampered = dir.path().join("tampered.txt");
    let text = std::fs::read_to_string(&model).unwrap();
    write(&tampered, &text.replace("labelset-model v1", "labelset-model v7"));
    let (code, _, stderr) = run(&[
        "predict",
        "--data",
        train.to_str().unwrap(),
        "--label-col",
        "group",
        "--model",
        tampered.to_str().unwrap(),
        "--thresholds",
        tampered.to_str().unwrap(),
        "--out",
        dir.path().join("x5").to_str().unwrap(),
    ]);
    assert_eq!(code, 4, "{stderr}");

    // Unknown oracle preset: validation error.
    let (code, _, _) = run(&[
        "oracle",
        "example9",
        "--coverage",
        "0.9",
        "--out",
        dir.path().join("x6").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}
