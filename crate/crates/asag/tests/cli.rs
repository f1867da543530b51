//! End-to-end checks of the binary: artifact layout, exit codes, manifest
//! behavior, and cleanup of partial output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asag"))
        .args(args)
        .output()
        .unwrap()
}

fn base_args<'a>(out: &'a str, extra: &[&'a str]) -> Vec<String> {
    let mut args: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    args.extend([
        "--corpus".into(),
        fixture("small_corpus.csv").to_str().unwrap().into(),
        "--phrases".into(),
        fixture("ki_phrases.json").to_str().unwrap().into(),
        "--out".into(),
        out.into(),
        "--seed".into(),
        "9".into(),
    ]);
    args
}

fn run_ok(out: &str, extra: &[&str]) {
    let args = base_args(out, extra);
    let output = Command::new(env!("CARGO_BIN_EXE_asag"))
        .args(&args)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "command {extra:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn featurize_writes_matrix_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("feat");
    run_ok(out.to_str().unwrap(), &["featurize"]);

    let csv = std::fs::read_to_string(out.join("features.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), 63); // response_id + 62 features
    assert_eq!(lines.count(), 40);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "featurize");
    assert_eq!(manifest["seed"], 9);
    let hash = manifest["artifacts"]["features.csv"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
}

#[test]
fn train_then_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("model");
    run_ok(out.to_str().unwrap(), &["train", "--model", "nam", "--epochs", "30"]);

    let input = dir.path().join("new.csv");
    std::fs::write(
        &input,
        "id,text\nq1,water is more dense so the pitch is lower in water\nq2,idk\n",
    )
    .unwrap();
    let pred_out = dir.path().join("pred");
    let output = run(&[
        "predict",
        "--model",
        out.join("model.json").to_str().unwrap(),
        "--phrases",
        fixture("ki_phrases.json").to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        pred_out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let csv = std::fs::read_to_string(pred_out.join("predictions.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "id,predicted_rating,prob_1,prob_2,prob_3,prob_4,prob_5,top_features");
    assert_eq!(lines.len(), 3);
    let strong: Vec<&str> = lines[1].split(',').collect();
    let weak: Vec<&str> = lines[2].split(',').collect();
    let rating = |row: &[&str]| row[1].parse::<i32>().unwrap();
    assert!(rating(&strong) > rating(&weak), "{csv}");
}

#[test]
fn explain_emits_reports_and_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("model");
    run_ok(out.to_str().unwrap(), &["train", "--model", "nam", "--epochs", "30"]);

    let explain_out = dir.path().join("explain");
    run_ok(
        explain_out.to_str().unwrap(),
        &[
            "explain",
            "--model",
            out.join("model.json").to_str().unwrap(),
            "--shape-count",
            "3",
        ],
    );
    for name in ["importance.csv", "importance.svg", "shapes.csv", "density.csv"] {
        assert!(explain_out.join(name).exists(), "missing {name}");
    }
    let shapes: Vec<String> = std::fs::read_dir(&explain_out)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().to_string_lossy().to_string();
            name.starts_with("shape_").then_some(name)
        })
        .filter(|n| n.ends_with(".svg"))
        .collect();
    assert_eq!(shapes.len(), 3, "{shapes:?}");
}

#[test]
fn explain_rejects_linear_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lr");
    run_ok(out.to_str().unwrap(), &["train", "--model", "logreg"]);

    let args = base_args(
        dir.path().join("explain").to_str().unwrap(),
        &["explain", "--model", out.join("model.json").to_str().unwrap()],
    );
    let output = Command::new(env!("CARGO_BIN_EXE_asag")).args(&args).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert_eq!(stderr.lines().count(), 1, "stderr: {stderr}");
    assert!(stderr.starts_with("error[3]:"), "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_2() {
    let output = run(&["train", "--model", "sideways"]);
    assert_eq!(output.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let args = base_args(
        dir.path().join("x").to_str().unwrap(),
        &["train", "--model", "nam", "--epochs", "0"],
    );
    let output = Command::new(env!("CARGO_BIN_EXE_asag")).args(&args).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3_and_leave_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    // A rating outside the declared range trips validation after the output
    // directory exists; nothing may be left behind.
    let corpus = dir.path().join("bad.csv");
    std::fs::write(&corpus, "id,text,rating\na,ok,1\nb,also ok,9\nc,fine,2\nd,yes,2\ne,more,1\n")
        .unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "featurize",
        "--corpus",
        corpus.to_str().unwrap(),
        "--phrases",
        fixture("ki_phrases.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
    if out.exists() {
        assert_eq!(std::fs::read_dir(&out).unwrap().count(), 0);
    }
}

#[test]
fn verify_manifest_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("feat");
    run_ok(out.to_str().unwrap(), &["featurize"]);

    let verify = |expect: Option<i32>| {
        let mut args = base_args(out.to_str().unwrap(), &["featurize"]);
        args.push("--verify-manifest".into());
        let output = Command::new(env!("CARGO_BIN_EXE_asag")).args(&args).output().unwrap();
        assert_eq!(output.status.code(), expect.or(Some(0)));
    };
    verify(None);

    let target = out.join("features.csv");
    let mut contents = std::fs::read_to_string(&target).unwrap();
    contents.push('x');
    std::fs::write(&target, contents).unwrap();
    verify(Some(3));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    let config = serde_json::json!({
        "corpus": fixture("small_corpus.csv"),
        "phrases": fixture("ki_phrases.json"),
        "epochs": 5,
        "seed": 123
    });
    std::fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();

    let out = dir.path().join("out");
    let output = run(&[
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "train",
        "--model",
        "nam",
        "--epochs",
        "7",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 123);
    assert_eq!(manifest["config"]["epochs"], 7);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("train_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["epochs"], 7);
    assert_eq!(report["epoch_losses"].as_array().unwrap().len(), 7);
}
