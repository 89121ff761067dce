use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fixseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fixseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = fixseg(args);
    assert!(
        out.status.success(),
        "fixseg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn oracle_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let spec = root.join("spec.json");
    fs::write(
        &spec,
        r#"{"dims": [24, 24, 24], "target_fraction": 0.02, "seed": 3}"#,
    )
    .unwrap();
    let cases = root.join("cases");
    let models = root.join("models");
    let report = root.join("report.csv");

    ok(&[
        "gen-phantom",
        "--spec",
        s(&spec),
        "--out",
        s(&cases),
        "--count",
        "4",
    ]);
    assert!(cases.join("case_003_mask.raw").exists());

    ok(&[
        "train",
        "--backend",
        "oracle",
        "--cases",
        s(&cases),
        "--folds",
        "4",
        "--seed",
        "1",
        "--noise",
        "0.05",
        "--out",
        s(&models),
    ]);
    assert!(models.join("folds.json").exists());
    assert!(models.join("fold_3").join("fine_axial.json").exists());

    let table = ok(&[
        "evaluate",
        "--cases",
        s(&cases),
        "--models",
        s(&models),
        "--rows",
        "coarse,iter1,thresh0.95,oracle-box",
        "--margins",
        "4",
        "--out",
        s(&report),
    ]);
    assert!(table.starts_with("| Method | Mean DSC | # Iterations | Max DSC | Min DSC |"));
    assert!(table.contains("| Oracle Bounding Box |"));
    let csv = fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 4);

    let md = ok(&["report", "--in", s(&report), "--format", "md"]);
    assert_eq!(md, table);
    let summary = ok(&["report", "--in", s(&report), "--format", "csv"]);
    assert_eq!(summary.lines().count(), 5);

    let pred = root.join("pred");
    let stdout = ok(&[
        "segment",
        "--volume",
        s(&cases.join("case_000")),
        "--truth",
        s(&cases.join("case_000_mask")),
        "--models",
        s(&models),
        "--threshold",
        "0.95",
        "--max-iters",
        "10",
        "--margins",
        "4",
        "--out",
        s(&pred),
    ]);
    assert!(stdout.contains("DSC against truth"));
    let trace: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pred.join("trace.json")).unwrap()).unwrap();
    assert!(trace["iterations"].as_array().unwrap().len() <= 10);
    assert!(pred.join("mask.json").exists() && pred.join("mask.raw").exists());
}

#[test]
fn classifier_training_writes_trained_weights() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cases = root.join("cases");
    let models = root.join("models");
    let config = root.join("config.json");
    fs::write(
        &config,
        r#"{"seed": 5, "train": {"epochs": 3, "min-pixels": 5}, "gen-phantom": {"count": 4}}"#,
    )
    .unwrap();
    let spec = root.join("spec.json");
    fs::write(&spec, r#"{"dims": [20, 20, 20], "target_fraction": 0.03}"#).unwrap();
    ok(&[
        "--config",
        s(&config),
        "gen-phantom",
        "--spec",
        s(&spec),
        "--out",
        s(&cases),
    ]);
    assert_eq!(fs::read_dir(&cases).unwrap().count(), 16);
    ok(&[
        "--config",
        s(&config),
        "train",
        "--cases",
        s(&cases),
        "--folds",
        "2",
        "--out",
        s(&models),
    ]);
    let model: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(models.join("fold_0").join("coarse_axial.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(model["backend"], "classifier");
    assert_eq!(model["params"]["epochs"], 3);
    assert_eq!(model["seed"], 5);

    // Classifier models need no ground truth.
    let pred = root.join("pred");
    ok(&[
        "segment",
        "--volume",
        s(&cases.join("case_001")),
        "--models",
        s(&models),
        "--fold",
        "1",
        "--max-iters",
        "2",
        "--out",
        s(&pred),
    ]);
    assert!(pred.join("trace.json").exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"count": 3, "seed": 1}"#).unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"dims": [12, 12, 12], "target_fraction": 0.02}"#).unwrap();
    let out = dir.path().join("cases");
    ok(&[
        "--config",
        s(&config),
        "gen-phantom",
        "--spec",
        s(&spec),
        "--count",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 8);
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    let out = fixseg(&["report", "--in", s(&missing)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = fixseg(&["gen-phantom"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"dims": [8, 8, 8], "radii": [9, 9, 9]}"#).unwrap();
    let out = fixseg(&["gen-phantom", "--spec", s(&bad), "--out", s(&missing)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("do not fit"));

    let out = fixseg(&[
        "evaluate",
        "--cases",
        s(&missing),
        "--models",
        s(&missing),
        "--rows",
        "median",
    ]);
    assert!(!out.status.success());

    let out = fixseg(&["train", "--backend", "forest", "--cases", "x", "--out", "y"]);
    assert!(!out.status.success());
}

#[test]
fn oracle_segmentation_without_truth_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let spec = root.join("spec.json");
    fs::write(&spec, r#"{"dims": [16, 16, 16], "target_fraction": 0.02}"#).unwrap();
    let cases = root.join("cases");
    let models = root.join("models");
    ok(&[
        "gen-phantom",
        "--spec",
        s(&spec),
        "--count",
        "4",
        "--out",
        s(&cases),
    ]);
    ok(&[
        "train",
        "--backend",
        "oracle",
        "--cases",
        s(&cases),
        "--out",
        s(&models),
    ]);
    let out = fixseg(&[
        "segment",
        "--volume",
        s(&cases.join("case_000")),
        "--models",
        s(&models),
        "--out",
        s(&root.join("p")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ground-truth"));
}
