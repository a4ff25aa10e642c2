use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bsa_core::agreement::{AgreementReport, RatingPair};
use bsa_core::dataset::{split_folds, Manifest};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn bsa(args: &[&str]) -> Output {
    bsa_env(args, &[])
}

fn bsa_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bsa"));
    cmd.args(args);
    for var in ["BSA_ENDPOINT", "BSA_MODEL", "BSA_API_KEY", "BSA_SEED", "BSA_CONFIG"] {
        cmd.env_remove(var);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn clean_manifest_has_no_violations() {
    let o = bsa(&["dataset", "validate", "--manifest", p(&fixture("clean.manifest"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("0 violations"));
    assert!(stderr(&o).contains("effective config"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["violations"], 0);
    assert_eq!(v["clips"], 6);
}

#[test]
fn dirty_manifest_fails_validation() {
    let o = bsa(&["dataset", "validate", "--manifest", p(&fixture("dirty.manifest"))]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["violations"], 4);
    assert_eq!(v["invalid_clips"][1]["violations"][0], "IllegalCoOccurrence");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bsa(&[]).status.code(), Some(2));
    assert_eq!(bsa(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bsa(&["agree", "--pairs"]).status.code(), Some(2));
    assert_eq!(bsa(&["agree", "--pairs", "/definitely/missing.pairs"]).status.code(), Some(2));
    assert_eq!(bsa(&["skill", "--segments", p(&fixture("rarp_like.segments")), "--rule", "every-other"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("log.jsonl");
    let o = bsa(&["plan", "run", "--synthetic", "1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("endpoint"));
    let out = dir.path().join("train");
    assert_eq!(bsa(&["train", "--out-dir", p(&out), "--loss", "hinge"]).status.code(), Some(2));
    assert_eq!(bsa(&["train", "--out-dir", p(&out), "--composition", "triple"]).status.code(), Some(2));
    assert_eq!(bsa(&["--help"]).status.code(), Some(0));
    assert_eq!(bsa(&["plan", "run", "--help"]).status.code(), Some(0));
}

#[test]
fn agree_matches_library_report() {
    let path = fixture("table_40_10.pairs");
    let o = bsa(&["agree", "--pairs", p(&path)]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["cohen_kappa"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert!((v["gwet_ac1"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(v["kappa_band"], "moderate");
    let lib = AgreementReport::compute(&RatingPair::read_csv(std::fs::File::open(&path).unwrap()).unwrap());
    assert_eq!(stdout(&o), serde_json::to_string(&lib).unwrap() + "\n");
    let human = bsa(&["agree", "--pairs", p(&path), "--human"]);
    assert!(stdout(&human).contains("0.6000 (moderate)"));
}

#[test]
fn skill_fixture_hand_counts() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("bar.svg");
    let o = bsa(&["skill", "--segments", p(&fixture("rarp_like.segments")), "--svg", p(&svg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // Actions G P P S G P S S K: P->P and S->S repeat. 87 s of 120 s are active.
    assert_eq!(v["multiple_attempts"], 2);
    assert_eq!(v["idle_proportion"].as_f64().unwrap(), 33.0 / 120.0);
    assert_eq!(v["duration_s"], 120.0);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("class=\"segment\"").count(), 9);
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
}

#[test]
fn folds_match_library_and_are_reproducible() {
    let path = fixture("clean.manifest");
    let a = bsa(&["dataset", "folds", "--manifest", p(&path), "--k", "2", "--seed", "5"]);
    let b = bsa_env(&["dataset", "folds", "--manifest", p(&path), "--k", "2"], &[("BSA_SEED", "5")]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    let lib = split_folds(&Manifest::load(&path).unwrap(), 2, 5).unwrap();
    assert_eq!(stdout(&a), serde_json::to_string(&lib).unwrap() + "\n");
    assert_eq!(bsa(&["dataset", "folds", "--manifest", p(&path), "--k", "9"]).status.code(), Some(2));
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = bsa(&[
            "train", "--out-dir", p(&out), "--epochs", "1", "--train-per-class", "3", "--test-per-class", "2", "--seed", "4", "--scores",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["checkpoint.json", "history.json", "scores.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    bsa_model::checkpoint::Checkpoint::load(&a.join("checkpoint.json")).unwrap();

    let eval_dir = dir.path().join("eval");
    let o = bsa(&[
        "evaluate", "--scores", p(&a.join("scores.jsonl")), "--out-dir", p(&eval_dir), "--resamples", "20", "--statistics", "auroc",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let youden = std::fs::read_to_string(eval_dir.join("youden.csv")).unwrap();
    assert!(youden.starts_with("class,auroc,tau,youden,sensitivity,specificity\n"));
    assert_eq!(youden.lines().count(), 4);
    assert!(std::fs::read_to_string(eval_dir.join("groupwise_action.csv")).unwrap().contains("macro,auroc"));
    assert!(!eval_dir.join("groupwise_surgery.csv").exists());
}

#[test]
fn plan_run_and_score_with_mock() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let log = dir.path().join(name);
        let o = bsa(&["plan", "run", "--synthetic", "3", "--clips", "9", "--mock", "ground-truth", "--out", p(&log), "--seed", "2"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        log
    };
    let (a, b) = (run("a.jsonl"), run("b.jsonl"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = bsa(&["plan", "score", "--log", p(&a)]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",1.000000,1.000000,1.000000")));
}

#[test]
fn planning_settings_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bsa.toml");
    std::fs::write(&cfg, "seed = 7\n[planning]\nmodel = \"from-file\"\nparallelism = 2\n").unwrap();
    let log = dir.path().join("log.jsonl");
    let base = ["--config", p(&cfg), "plan", "run", "--synthetic", "1", "--clips", "6", "--mock", "ground-truth", "--out", p(&log)];
    let model_of = |extra: &[&str], env: &[(&str, &str)]| {
        let mut args: Vec<&str> = base.to_vec();
        args.extend_from_slice(extra);
        let o = bsa_env(&args, env);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let err = stderr(&o);
        let line = err.lines().find(|l| l.contains("effective config")).unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(line.split_once("effective config ").unwrap().1).unwrap();
        (v["client"]["model"].as_str().unwrap().to_string(), v["seed"].as_u64().unwrap(), v["client"]["parallelism"].as_u64().unwrap())
    };
    assert_eq!(model_of(&[], &[]), ("from-file".into(), 7, 2));
    assert_eq!(model_of(&[], &[("BSA_MODEL", "from-env"), ("BSA_SEED", "8")]), ("from-env".into(), 8, 2));
    assert_eq!(
        model_of(&["--model", "from-flag", "--seed", "9", "--parallelism", "3"], &[("BSA_MODEL", "from-env")]),
        ("from-flag".into(), 9, 3)
    );
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[planning]\nmodle = 1\n").unwrap();
    assert_eq!(bsa(&["--config", p(&bad), "agree", "--pairs", p(&fixture("table_40_10.pairs"))]).status.code(), Some(2));
}

#[test]
fn api_key_is_never_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let o = bsa_env(
        &["plan", "run", "--synthetic", "1", "--clips", "6", "--mock", "ground-truth", "--out", p(&log)],
        &[("BSA_API_KEY", "sk-secret-123")],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(!stderr(&o).contains("sk-secret-123"));
    assert!(stderr(&o).contains("\"api_key_set\":true"));
    assert!(!std::fs::read_to_string(&log).unwrap().contains("sk-secret-123"));
}
