//! End-to-end tests that drive the compiled `glucolens` binary through
//! the full artifact pipeline, the synthetic-data round trip, and the
//! documented exit-code contract (0 success, 1 runtime failure, 2 bad
//! usage or bad input).

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn glucolens(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glucolens"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let output = glucolens(dir, args);
    assert!(
        output.status.success(),
        "glucolens {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("utf-8 stdout")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("missing artifact {name}: {e}"))
}

#[test]
fn help_lists_every_subcommand() {
    let dir = TempDir::new().unwrap();
    let stdout = run_ok(dir.path(), &["--help"]);
    for name in [
        "ingest",
        "featurize",
        "train",
        "evaluate",
        "predict",
        "explain",
        "synth",
    ] {
        assert!(stdout.contains(name), "--help does not mention `{name}`");
    }
}

#[test]
fn pipeline_runs_end_to_end_and_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let dir = dir.path();

    let stdout = run_ok(dir, &["--seed", "3", "synth", "--participants", "4"]);
    assert!(stdout.contains("4 participants"), "synth summary: {stdout}");

    run_ok(dir, &["featurize", "--feature-set", "all"]);
    let features = read(dir, "features.csv");
    let rows = features.lines().count() - 1;
    assert!(rows > 50, "only {rows} feature rows");
    // One warm-up workday per phase and participant is skipped.
    let skipped = read(dir, "skipped.csv");
    assert_eq!(skipped.lines().count() - 1, 4 * 3, "skipped-meal rows");

    // Same inputs, same bytes.
    let before = features.clone();
    run_ok(dir, &["featurize", "--feature-set", "all"]);
    assert_eq!(read(dir, "features.csv"), before, "featurize is not idempotent");

    run_ok(
        dir,
        &[
            "--seed", "3",
            "train",
            "--target", "hyper",
            "--model", "rf",
            "--n-est", "40",
        ],
    );
    let predictor: serde_json::Value =
        serde_json::from_str(&read(dir, "predictor.json")).expect("predictor parses");
    assert_eq!(predictor["target"], "hyper");
    assert_eq!(predictor["feature_set"], "all");

    run_ok(dir, &["predict"]);
    let predictions = read(dir, "predictions.csv");
    let mut lines = predictions.lines();
    assert_eq!(lines.next(), Some("row,label,p_normal,p_hyper"));
    assert_eq!(lines.count(), rows, "one prediction per feature row");

    run_ok(
        dir,
        &[
            "--seed", "3",
            "evaluate",
            "--target", "auc",
            "--model", "ridge",
            "--n-seeds", "5",
        ],
    );
    let report: serde_json::Value =
        serde_json::from_str(&read(dir, "report.json")).expect("report parses");
    assert_eq!(report["n_seeds"], 5);
    assert_eq!(report["per_seed"].as_array().unwrap().len(), 5);
    assert!(report["aggregate_mean"]["nrmse"].is_number());
    assert!(report["aggregate_mean"]["baseline_nrmse"].is_number());

    // Evaluation reports are reproducible byte for byte.
    let first = read(dir, "report.json");
    run_ok(
        dir,
        &[
            "--seed", "3",
            "evaluate",
            "--target", "auc",
            "--model", "ridge",
            "--n-seeds", "5",
        ],
    );
    assert_eq!(read(dir, "report.json"), first, "evaluate is not idempotent");

    let stdout = run_ok(dir, &["--seed", "3", "explain", "--row", "0", "--budget", "4000"]);
    assert!(
        stdout.contains("row 0"),
        "explain does not report the row: {stdout}"
    );
    let cfs: serde_json::Value =
        serde_json::from_str(&read(dir, "counterfactuals.json")).expect("counterfactuals parse");
    assert!(
        !cfs["counterfactuals"].as_array().unwrap().is_empty(),
        "no counterfactual options in the artifact"
    );
}

#[test]
fn synthetic_csv_sources_round_trip_through_ingest() {
    let dir = TempDir::new().unwrap();
    let dir = dir.path();

    run_ok(dir, &["--seed", "11", "synth", "--participants", "3", "--csv"]);
    let raw = dir.join("raw");
    for name in ["participants.csv", "food_log.csv", "work_log.csv"] {
        assert!(raw.join(name).exists(), "missing raw source {name}");
    }

    let participants = raw.join("participants.csv");
    let food = raw.join("food_log.csv");
    let work = raw.join("work_log.csv");
    run_ok(
        dir,
        &[
            "ingest",
            "--participants", participants.to_str().unwrap(),
            "--food-log", food.to_str().unwrap(),
            "--work-log", work.to_str().unwrap(),
            "--out", dir.join("reingested.json").to_str().unwrap(),
        ],
    );
    assert_eq!(
        read(dir, "cohort.json"),
        read(dir, "reingested.json"),
        "ingesting the emitted CSVs does not reproduce the cohort artifact"
    );
}

#[test]
fn changing_the_seed_changes_the_predictor() {
    let dir = TempDir::new().unwrap();
    let dir = dir.path();
    run_ok(dir, &["--seed", "1", "synth", "--participants", "3"]);
    run_ok(dir, &["featurize"]);

    let train = |seed: &str, out: &str| {
        run_ok(
            dir,
            &[
                "--seed", seed,
                "train",
                "--target", "hyper",
                "--model", "rf",
                "--n-est", "20",
                "--out", dir.join(out).to_str().unwrap(),
            ],
        );
    };
    train("1", "a.json");
    train("1", "b.json");
    train("2", "c.json");
    assert_eq!(read(dir, "a.json"), read(dir, "b.json"), "same seed, different model");
    assert_ne!(read(dir, "a.json"), read(dir, "c.json"), "new seed, same model");
}

#[test]
fn sweep_preset_writes_one_report_per_split() {
    let dir = TempDir::new().unwrap();
    let dir = dir.path();
    run_ok(dir, &["--seed", "4", "synth", "--participants", "4"]);
    run_ok(dir, &["featurize"]);
    let stdout = run_ok(
        dir,
        &[
            "--seed", "4",
            "evaluate",
            "--target", "hyper",
            "--model", "rf",
            "--n-est", "20",
            "--n-seeds", "3",
            "--preset", "training-size-sweep",
        ],
    );
    for label in ["70-30", "80-20", "87-13", "90-10", "95-5", "99-1"] {
        let name = format!("report-{label}.json");
        assert!(dir.join(&name).exists(), "missing {name}");
    }
    assert!(stdout.contains("95/5"), "sweep output lacks the split labels");
}

#[test]
fn missing_input_exits_two_and_names_the_path() {
    let dir = TempDir::new().unwrap();
    let output = glucolens(dir.path(), &["featurize", "--cohort", "/no/such/cohort.json"]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("/no/such/cohort.json"),
        "stderr does not name the missing file: {stderr}"
    );
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let dir = dir.path();
    run_ok(dir, &["synth", "--participants", "2"]);
    run_ok(dir, &["featurize", "--feature-set", "self_gl"]);

    // Unknown preset.
    let output = glucolens(dir, &["evaluate", "--preset", "bogus"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&output.stderr).contains("training-size-sweep"),
        "the error should list the valid preset"
    );

    // Feature-set mismatch between the matrix and the request.
    let output = glucolens(dir, &["train", "--feature-set", "all", "--target", "hyper"]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("self-gl") && stderr.contains("all"),
        "mismatch message should name both sets: {stderr}"
    );

    // Unknown feature set token.
    let output = glucolens(dir, &["featurize", "--feature-set", "everything"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn failed_counterfactual_search_exits_one() {
    let dir = TempDir::new().unwrap();
    let dir = dir.path();
    run_ok(dir, &["--seed", "8", "synth", "--participants", "3"]);
    run_ok(dir, &["featurize"]);
    // The minimum viable budget evaluates a single random candidate set,
    // which does not flip the model on this seed.
    let output = glucolens(dir, &["--seed", "8", "explain", "--row", "0", "--budget", "4"]);
    assert_eq!(
        output.status.code(),
        Some(1),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("no valid counterfactual"),
        "stderr should describe the failed search: {stderr}"
    );
}
