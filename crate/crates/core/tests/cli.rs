//! Drives the binary through a full small workflow.

use std::path::Path;
use std::process::{Command, Output};

fn glycopipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glycopipe")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = glycopipe(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn small_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let raw = d.join("raw.csv");
    let oracle = d.join("oracle.csv");
    ok(&["generate", "--n", "600", "--seed", "3", "--out", p(&raw), "--oracle", p(&oracle)]);
    let text = std::fs::read_to_string(&raw).unwrap();
    assert_eq!(text.lines().count(), 601);
    assert!(text.lines().next().unwrap().starts_with("patient_id,"));
    assert_eq!(std::fs::read_to_string(&oracle).unwrap().lines().count(), 601);

    let feats = d.join("features");
    let ranking = ok(&["preprocess", "--data", p(&raw), "--out", p(&feats), "--seed", "3"]);
    assert!(ranking.contains("Importance"));
    for f in ["train_features.csv", "test_features.csv", "preprocess.ckpt"] {
        assert!(feats.join(f).exists(), "{f}");
    }

    let model = d.join("model.ckpt");
    let train = feats.join("train_features.csv");
    let test = feats.join("test_features.csv");
    let history = ok(&["train", "--data", p(&train), "--out", p(&model), "--epochs", "3", "--seed", "1"]);
    assert!(history.contains("Val AUC"));

    let metrics = d.join("metrics.json");
    let table = ok(&["evaluate", "--model", p(&model), "--data", p(&test), "--out", p(&metrics)]);
    assert!(table.contains("AUC"));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    let auc = m["auc"].as_f64().unwrap();
    assert!(auc > 0.5 && auc <= 1.0, "{auc}");

    let tune_out = d.join("tune");
    let t = ok(&[
        "tune", "--data", p(&train), "--budget", "4", "--eta", "2", "--max-t", "2", "--proposer", "random",
        "--out", p(&tune_out),
    ]);
    assert!(t.contains("Hyperparameter") && t.contains("Optimized Value"));
    assert_eq!(std::fs::read_to_string(tune_out.join("trials.jsonl")).unwrap().lines().count(), 4);

    let key = d.join("key.ckpt");
    ok(&["keygen", "--bits", "128", "--seed", "2", "--out", p(&key)]);
    let fed = d.join("fed.ckpt");
    ok(&[
        "fedtrain", "--data", p(&train), "--clients", "2", "--rounds", "1", "--mode", "encrypted", "--key", p(&key),
        "--out", p(&fed),
    ]);
    assert!(fed.exists());

    let ex = d.join("explain");
    ok(&["explain", "--model", p(&model), "--data", p(&test), "--rows", "3", "--out", p(&ex)]);
    for f in ["attributions.csv", "ranking.csv", "heatmap.csv", "robustness.json"] {
        assert!(ex.join(f).exists(), "{f}");
    }

    let sim = d.join("sim");
    let s = ok(&["serve-sim", "--seed", "1", "--out", p(&sim)]);
    assert!(s.contains("Cache Hit Rate"));
    assert!(sim.join("sim_metrics.json").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(glycopipe(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(glycopipe(&["train"]).status.code(), Some(2));
    assert_eq!(glycopipe(&["tune", "--data", "x.csv", "--proposer", "grid"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = glycopipe(&["train", "--data", p(&missing), "--out", p(&dir.path().join("m.ckpt"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let out = glycopipe(&["keygen", "--bits", "16", "--out", p(&dir.path().join("k.ckpt"))]);
    assert_eq!(out.status.code(), Some(1));
}
