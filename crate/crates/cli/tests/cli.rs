//! End-to-end runs of the `brain-infomax` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use brain_infomax::graph_data::load_cohort;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_brain-infomax");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

/// A 24-ROI cohort of 12 subjects per class written to `cohort.json`.
fn small_cohort(dir: &TempDir) -> String {
    let out = path(dir, "cohort.json");
    ok(&[
        "generate",
        "--rois",
        "24",
        "--subjects-per-class",
        "12",
        "--timesteps",
        "80",
        "--seed",
        "5",
        "--out",
        &out,
    ]);
    out
}

fn small_training(dir: &TempDir, cohort: &str, epochs: &str, extra: &[&str]) -> PathBuf {
    let out = dir.path().join("train");
    let out_s = out.display().to_string();
    let mut args = vec![
        "train",
        "--cohort",
        cohort,
        "--out-dir",
        &out_s,
        "--epochs",
        epochs,
        "--folds",
        "3",
        "--seed",
        "5",
    ];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn metrics(dir: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(dir.join("metrics.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn generate_is_reproducible_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let a = path(&dir, "a.json");
    let b = path(&dir, "b.json");
    let stdout = ok(&["generate", "--seed", "7", "--out", &a]);
    ok(&["generate", "--seed", "7", "--out", &b]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(stdout.contains("120 graphs"), "{stdout}");

    let cohort = load_cohort(Path::new(&a)).unwrap();
    assert_eq!(cohort.num_rois(), 148);
    assert_eq!(cohort.graphs().len(), 120);
    assert_eq!(
        cohort.planted_truth().unwrap().separable_rois,
        (74..80).collect::<Vec<_>>()
    );

    let c = path(&dir, "c.json");
    ok(&["generate", "--seed", "8", "--out", &c]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn augmented_generation_counts_replicates() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "aug.json");
    ok(&[
        "generate",
        "--rois",
        "16",
        "--subjects-per-class",
        "5",
        "--timesteps",
        "60",
        "--replicates",
        "3",
        "--out",
        &out,
    ]);
    assert_eq!(load_cohort(Path::new(&out)).unwrap().graphs().len(), 30);
}

#[test]
fn missing_output_path_is_a_usage_error() {
    let out = run(&["generate", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.toml");
    fs::write(&cfg, "[training]\nepochz = 3\n").unwrap();
    let out = run(&["generate", "--config", &cfg, "--out", &path(&dir, "x.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochz"));
}

#[test]
fn invalid_flag_values_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let out = run(&["generate", "--rois", "4", "--out", &path(&dir, "x.json")]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["train", "--widths", "8,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_paths_and_flags_override_it() {
    let dir = TempDir::new().unwrap();
    let cohort = path(&dir, "from_config.json");
    let cfg = path(&dir, "run.toml");
    fs::write(
        &cfg,
        format!(
            "[generator]\nn_rois = 16\nsubjects_per_class = 6\ntimesteps = 60\n[paths]\ncohort = {cohort:?}\n"
        ),
    )
    .unwrap();
    ok(&["generate", "--config", &cfg, "--subjects-per-class", "4"]);
    let loaded = load_cohort(Path::new(&cohort)).unwrap();
    assert_eq!(loaded.num_rois(), 16);
    assert_eq!(loaded.graphs().len(), 8);
}

#[test]
fn training_writes_per_fold_artifacts() {
    let dir = TempDir::new().unwrap();
    let cohort = small_cohort(&dir);
    let out = small_training(&dir, &cohort, "2", &[]);
    for k in 0..3 {
        let fold = out.join(format!("fold_{k}"));
        assert!(fold.join("checkpoint.json").is_file());
        let records = metrics(&fold);
        assert_eq!(records.len(), 2);
        assert!(records.iter().all(|r| r["l2"].as_f64().unwrap() > 0.0));
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("cv_report.json")).unwrap()).unwrap();
    assert_eq!(report["test_f"].as_array().unwrap().len(), 3);
}

#[test]
fn single_epoch_single_fold() {
    let dir = TempDir::new().unwrap();
    let cohort = small_cohort(&dir);
    let out = small_training(&dir, &cohort, "1", &["--fold", "1"]);
    assert_eq!(metrics(&out.join("fold_1")).len(), 1);
    assert!(!out.join("fold_0").exists());
    assert!(!out.join("cv_report.json").exists());
}

#[test]
fn fold_out_of_range_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cohort = small_cohort(&dir);
    let out = run(&[
        "train",
        "--cohort",
        &cohort,
        "--out-dir",
        &path(&dir, "t"),
        "--folds",
        "3",
        "--fold",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classification_only_loss_has_no_infomax_or_link_term() {
    let dir = TempDir::new().unwrap();
    let cohort = small_cohort(&dir);
    let out = small_training(&dir, &cohort, "2", &["--loss", "l1", "--fold", "0"]);
    for r in metrics(&out.join("fold_0")) {
        assert_eq!(r["l2"].as_f64().unwrap(), 0.0);
        assert_eq!(r["lreg"].as_f64().unwrap(), 0.0);
        assert_eq!(r["total"], r["l1"]);
    }
}

#[test]
fn eval_reports_the_held_out_fold() {
    let dir = TempDir::new().unwrap();
    let cohort = small_cohort(&dir);
    let out = small_training(&dir, &cohort, "2", &[]);
    let model = out.join("fold_2/checkpoint.json").display().to_string();
    let json = path(&dir, "eval.json");
    let stdout = ok(&[
        "eval", "--model", &model, "--cohort", &cohort, "--out", &json,
    ]);
    assert!(stdout.contains("fold 2"), "{stdout}");
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(record["fold"], 2);
    let n = record["subjects"].as_array().unwrap().len();
    assert_eq!(n, 8);
    assert_eq!(record["probabilities"].as_array().unwrap().len(), n);
}

#[test]
fn missing_checkpoint_is_a_runtime_error_naming_the_path() {
    let dir = TempDir::new().unwrap();
    let cohort = small_cohort(&dir);
    let missing = path(&dir, "nowhere/checkpoint.json");
    let out = run(&["eval", "--model", &missing, "--cohort", &cohort]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&missing));
}

#[test]
fn analyze_writes_the_report_and_respects_the_threshold() {
    let dir = TempDir::new().unwrap();
    let cohort = small_cohort(&dir);
    let out = small_training(&dir, &cohort, "2", &[]);
    let model = out.join("fold_0/checkpoint.json").display().to_string();
    let report = dir.path().join("analysis");
    let report_s = report.display().to_string();
    let stdout = ok(&[
        "analyze",
        "--model",
        &model,
        "--cohort",
        &cohort,
        "--perplexity",
        "2",
        "--iterations",
        "200",
        "--threshold",
        "1.0",
        "--out-dir",
        &report_s,
    ]);
    assert!(stdout.contains("marked 0 of 24"), "{stdout}");
    let table = fs::read_to_string(report.join("regions.tsv")).unwrap();
    assert_eq!(table.lines().count(), 25);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(report.join("summary.json")).unwrap()).unwrap();
    assert!(summary["marked"].as_array().unwrap().is_empty());
    assert!(summary["pair_scores"]["positive"].is_f64());
}

#[test]
fn infeasible_perplexity_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cohort = small_cohort(&dir);
    let out = small_training(&dir, &cohort, "2", &["--fold", "0"]);
    let model = out.join("fold_0/checkpoint.json").display().to_string();
    let out = run(&[
        "analyze",
        "--model",
        &model,
        "--cohort",
        &cohort,
        "--out-dir",
        &path(&dir, "a"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("8 test graphs"));
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["generate", "train", "eval", "analyze"] {
        let stdout = ok(&[sub, "--help"]);
        assert!(stdout.contains("--config"), "{sub}: {stdout}");
    }
    assert!(ok(&["--help"]).contains("analyze"));
}
