use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mmlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmlab"))
        .args(args)
        .current_dir(dir)
        .env("MMLAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str], dir: &Path) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = mmlab(&full, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn small_alpha(dir: &Path) {
    ok_json(&["gen", "--variant", "alpha", "--seed", "3", "--out", "a.bin", "--n", "300"], dir);
}

#[test]
fn gen_is_deterministic_and_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok_json(&["gen", "--variant", "beta", "--seed", "5", "--out", "x/b1.bin", "--n", "200"], dir.path());
    let b = ok_json(&["gen", "--variant", "beta", "--seed", "5", "--out", "x/b2.bin", "--n", "200"], dir.path());
    assert_eq!(a["sha256"], b["sha256"]);
    assert_eq!(a["rows"], 200);
    for f in ["b1.bin", "b1.split", "b1.json", "b1.manifest.json"] {
        assert!(dir.path().join("x").join(f).is_file(), "{f} missing");
    }
    let c = ok_json(&["gen", "--variant", "beta", "--seed", "6", "--out", "x/b3.bin", "--n", "200"], dir.path());
    assert_ne!(a["sha256"], c["sha256"]);
}

#[test]
fn gamma_ignores_n() {
    let dir = tempfile::tempdir().unwrap();
    let g = ok_json(&["gen", "--variant", "gamma", "--seed", "0", "--out", "g.bin", "--n", "100"], dir.path());
    assert_eq!(g["rows"], 7500);
    assert_eq!(g["class_counts"], serde_json::json!([2500, 2500, 2500]));
}

#[test]
fn umt_without_distillation_matches_naive() {
    let dir = tempfile::tempdir().unwrap();
    small_alpha(dir.path());
    let it = ["--max-iters", "20"];
    let run = |extra: &[&str]| {
        let mut args = vec!["train", "--data", "a.bin"];
        args.extend_from_slice(extra);
        args.extend_from_slice(&it);
        ok_json(&args, dir.path())
    };
    run(&["--mode", "uni1", "--out", "t"]);
    run(&["--mode", "uni2", "--out", "t"]);
    run(&["--mode", "naive", "--out", "n"]);
    run(&[
        "--mode", "umt", "--out", "u", "--teacher1", "t/uni1.bundle.json", "--teacher2", "t/uni2.bundle.json",
        "--lambda-distill", "0",
    ]);
    let digest = |p: &str| {
        let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join(p)).unwrap()).unwrap();
        v["params_digest"].as_str().unwrap().to_string()
    };
    assert_eq!(digest("n/naive.bundle.json"), digest("u/umt.bundle.json"));
    let result: Value = serde_json::from_slice(&std::fs::read(dir.path().join("u/umt.result.json")).unwrap()).unwrap();
    assert_eq!(result["manifest"]["command"], "train");
    assert_eq!(result["manifest"]["inputs"].as_array().unwrap().len(), 4);
}

#[test]
fn usage_and_runtime_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    small_alpha(dir.path());
    let bad_mode = mmlab(&["train", "--mode", "bogus", "--data", "a.bin", "--out", "o"], dir.path());
    assert_eq!(bad_mode.status.code(), Some(2));
    let no_teachers = mmlab(&["train", "--mode", "umt", "--data", "a.bin", "--out", "o"], dir.path());
    assert_eq!(no_teachers.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_teachers.stderr).contains("teacher"));
    let missing = mmlab(&["probe", "--model", "nope.json", "--data", "a.bin", "--modality", "1"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn probe_ume_and_decide_report_accuracies() {
    let dir = tempfile::tempdir().unwrap();
    small_alpha(dir.path());
    for m in ["uni1", "uni2", "naive"] {
        ok_json(&["train", "--mode", m, "--data", "a.bin", "--out", "r", "--max-iters", "60"], dir.path());
    }
    let p = ok_json(
        &["probe", "--model", "r/naive.bundle.json", "--data", "a.bin", "--modality", "1", "--seeds", "3"],
        dir.path(),
    );
    assert_eq!(p["reports"].as_array().unwrap().len(), 3);
    let (lo, med, hi) = (p["min"].as_f64().unwrap(), p["median"].as_f64().unwrap(), p["max"].as_f64().unwrap());
    assert!(lo <= med && med <= hi);
    let u = ok_json(
        &["ume", "--model1", "r/uni1.bundle.json", "--model2", "r/uni2.bundle.json", "--data", "a.bin", "--weights", "1,1"],
        dir.path(),
    );
    assert!(u["test_acc"].as_f64().unwrap() > 0.9);
    let swapped = mmlab(
        &["ume", "--model1", "r/uni2.bundle.json", "--model2", "r/uni1.bundle.json", "--data", "a.bin"],
        dir.path(),
    );
    assert_eq!(swapped.status.code(), Some(1));
    std::fs::write(dir.path().join("cfg.json"), r#"{"train": {"max_iters": 60}}"#).unwrap();
    let d = ok_json(&["decide", "--data", "a.bin", "--config", "cfg.json"], dir.path());
    let rec = d["decision"]["recommendation"].as_str().unwrap();
    assert!(rec == "UMT" || rec == "UME");
}

#[test]
fn theory_emits_all_checks() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(
        &["theory", "--universe", "example", "--trials", "3", "--delta", "0.1", "--boost", "0.15", "--lemma-trials", "100000"],
        dir.path(),
    );
    let r = &v["report"];
    assert_eq!(r["runs"].as_array().unwrap().len(), 3);
    assert_eq!(r["theorem2"]["s"], serde_json::json!(["h"]));
    let ratio = r["lemma"]["ratio_estimate"].as_f64().unwrap();
    assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    std::fs::write(dir.path().join("u.json"), r#"{"c": 2, "n_modalities": 2, "features": [
        {"id": "a", "modality": 1, "p": 0.3}, {"id": "b", "modality": "m2", "p": 0.2}]}"#)
    .unwrap();
    let v = ok_json(&["theory", "--universe", "u.json", "--trials", "2", "--delta", "0.05"], dir.path());
    assert_eq!(v["report"]["c"], 2.0);
    assert!(v["report"].get("theorem2").is_none());
    let bad = mmlab(&["theory", "--universe", "example", "--delta", "1.5"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn report_of_empty_dir_is_empty_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let r = ok_json(&["report", "--in", "empty", "--out", "rep.json"], dir.path());
    assert_eq!(r["n_results"], 0);
    assert_eq!(r["warnings"].as_array().unwrap().len(), 1);
    assert!(r["accuracy"].as_array().unwrap().is_empty());
    assert!(dir.path().join("rep.json").is_file());
}

#[test]
fn report_aggregates_train_results() {
    let dir = tempfile::tempdir().unwrap();
    small_alpha(dir.path());
    for m in ["uni1", "uni2", "naive"] {
        ok_json(&["train", "--mode", m, "--data", "a.bin", "--out", "runs/s3", "--max-iters", "80"], dir.path());
    }
    let r = ok_json(&["report", "--in", "runs"], dir.path());
    let row = &r["accuracy"][0];
    assert_eq!(row["variant"], "alpha");
    assert_eq!(row["multi"]["n_runs"], 1);
    assert_eq!(row["uni1"]["published"], 100.0);
    assert!(r["confusion_checks"].as_array().unwrap().is_empty());
}
