//! Dataset splitting, prediction metrics, seeded multi-repetition
//! experiments, training-size sweeps, and a synthetic cohort generator
//! for desk-scale end-to-end runs.
//!
//! The experiment runner repeats split → (train-side resampling) → fit →
//! predict → score over many derived seeds and aggregates the per-seed
//! metrics. Test folds are never balanced or augmented; every report
//! records per-seed row provenance so that claim is checkable after the
//! fact. Reports carry a fingerprint of the full configuration, making
//! reruns byte-comparable.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ensemble::{soft_vote_predict, EnsembleError, SoftVoteEnsemble};
use crate::features::{standardize, Dataset, FeatureError, TargetKind};
use crate::ingest::{
    assemble_participant, ActivityEvent, ActivityEventLog, ActivityKind, CgmSample, CgmTrace,
    MacroProfile, MealKind, MealRecord, ParticipantData, Phase, WorkdayRecord,
};
use crate::models::{
    AnyModel, ForestConfig, ForestModel, GbtConfig, GbtModel, MlpHyper, MlpModel, ModelError,
    RidgeModel,
};
use crate::resampling::{
    adasyn_balance, gaussian_augment, AdasynConfig, AugmentConfig, ResampleError,
};
use crate::rng::{derive_seed, stream_rng};

/// Default number of seeded repetitions per experiment.
pub const DEFAULT_N_SEEDS: usize = 100;

/// Default relative-error thresholds (percent) for [`tolerance_curve`].
pub const DEFAULT_TOLERANCE_PCTS: [f64; 4] = [5.0, 10.0, 15.0, 20.0];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("inputs have mismatched lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("inputs are empty")]
    EmptyInput,
    #[error("test fraction {value} is outside (0, 1)")]
    InvalidFraction { value: f64 },
    #[error("dataset with {rows} rows is too small for this split")]
    DatasetTooSmall { rows: usize },
    #[error(
        "class {label} has {available} rows but the split needs {needed}"
    )]
    InsufficientClassCount {
        label: bool,
        available: usize,
        needed: usize,
    },
    #[error("true targets have non-positive mean; cannot mean-normalize")]
    ZeroMeanTarget,
    #[error("true targets have zero range; cannot range-normalize")]
    ZeroRangeTarget,
    #[error("tolerance curve needs positive truths, found {value}")]
    NonPositiveTruth { value: f64 },
    #[error("experiment needs at least one seed")]
    NoSeeds,
    #[error("repetition {seed_index} failed: {source}")]
    SeedFailure {
        seed_index: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// How to size the test fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitKind {
    /// Hold out a random fraction of all rows (the usual regression split).
    RegressionFraction { test_fraction: f64 },
    /// Hold out exactly `n_per_class` rows of each label (the balanced
    /// construction used for the smallest classification test sets).
    ClassificationBalancedCount { n_per_class: usize },
}

/// A sized, seeded split request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub seed: u64,
}

/// Split `dataset` into disjoint, exhaustive (train, test) folds.
///
/// Row order within each fold follows the original dataset order, so the
/// same seed always reproduces the same folds byte for byte.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), EvalError> {
    let n = dataset.len();
    if n < 2 {
        return Err(EvalError::DatasetTooSmall { rows: n });
    }
    let mut rng = stream_rng(spec.seed, 0);
    let mut test_idx: Vec<usize>;
    match spec.kind {
        SplitKind::RegressionFraction { test_fraction } => {
            if !test_fraction.is_finite() || test_fraction <= 0.0 || test_fraction >= 1.0 {
                return Err(EvalError::InvalidFraction {
                    value: test_fraction,
                });
            }
            let n_test = ((n as f64) * test_fraction).round() as usize;
            let n_test = n_test.clamp(1, n - 1);
            let mut indices: Vec<usize> = (0..n).collect();
            indices.shuffle(&mut rng);
            test_idx = indices[..n_test].to_vec();
        }
        SplitKind::ClassificationBalancedCount { n_per_class } => {
            let labels = dataset.labels();
            let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
            let mut neg: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
            for (label, class) in [(true, &pos), (false, &neg)] {
                if class.len() < n_per_class {
                    return Err(EvalError::InsufficientClassCount {
                        label,
                        available: class.len(),
                        needed: n_per_class,
                    });
                }
            }
            if pos.len() + neg.len() == 2 * n_per_class {
                return Err(EvalError::DatasetTooSmall { rows: n });
            }
            pos.shuffle(&mut rng);
            neg.shuffle(&mut rng);
            test_idx = pos[..n_per_class].to_vec();
            test_idx.extend_from_slice(&neg[..n_per_class]);
        }
    }
    test_idx.sort_unstable();
    let mut in_test = vec![false; n];
    for &i in &test_idx {
        in_test[i] = true;
    }
    let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    Ok((dataset.select(&train_idx), dataset.select(&test_idx)))
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Denominator used to normalize the RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// Mean of the true targets (the default; an NRMSE of 0.12 then reads
    /// as "12% of the typical target value").
    Mean,
    /// Range (max − min) of the true targets.
    Range,
}

/// Root-mean-squared error divided by the mean of the true targets.
pub fn nrmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64, EvalError> {
    nrmse_with(y_true, y_pred, Normalizer::Mean)
}

/// NRMSE with an explicit normalizer choice.
pub fn nrmse_with(
    y_true: &[f64],
    y_pred: &[f64],
    normalizer: Normalizer,
) -> Result<f64, EvalError> {
    check_paired(y_true, y_pred)?;
    let n = y_true.len() as f64;
    let mse = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum::<f64>()
        / n;
    let denom = match normalizer {
        Normalizer::Mean => {
            let mean = y_true.iter().sum::<f64>() / n;
            if mean <= 0.0 {
                return Err(EvalError::ZeroMeanTarget);
            }
            mean
        }
        Normalizer::Range => {
            let max = y_true.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = y_true.iter().cloned().fold(f64::INFINITY, f64::min);
            if max - min <= 0.0 {
                return Err(EvalError::ZeroRangeTarget);
            }
            max - min
        }
    };
    Ok(mse.sqrt() / denom)
}

/// Accuracy plus macro-averaged precision, recall, and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
}

/// Score binary predictions with macro averaging over both classes.
///
/// A class with an empty denominator (no predicted positives for
/// precision, no actual positives for recall, both zero for F1)
/// contributes 0 for that statistic, which is exactly how tiny test sets
/// end up with macro scores of zero.
pub fn classification_metrics(
    y_true: &[bool],
    y_pred: &[bool],
) -> Result<ClassificationMetrics, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = y_true.len() as f64;
    let correct = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count() as f64;

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    for class in [true, false] {
        let tp = y_true
            .iter()
            .zip(y_pred)
            .filter(|&(&t, &p)| t == class && p == class)
            .count() as f64;
        let fp = y_true
            .iter()
            .zip(y_pred)
            .filter(|&(&t, &p)| t != class && p == class)
            .count() as f64;
        let fn_ = y_true
            .iter()
            .zip(y_pred)
            .filter(|&(&t, &p)| t == class && p != class)
            .count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
    }
    Ok(ClassificationMetrics {
        accuracy: correct / n,
        precision_macro: precision_sum / 2.0,
        recall_macro: recall_sum / 2.0,
        f1_macro: f1_sum / 2.0,
    })
}

/// Fraction of predictions whose relative error is strictly below each
/// threshold (in percent). Thresholds should be sorted ascending; the
/// resulting fractions are then non-decreasing.
pub fn tolerance_curve(
    y_true: &[f64],
    y_pred: &[f64],
    threshold_pcts: &[f64],
) -> Result<Vec<f64>, EvalError> {
    check_paired(y_true, y_pred)?;
    if let Some(&bad) = y_true.iter().find(|&&t| t <= 0.0 || !t.is_finite()) {
        return Err(EvalError::NonPositiveTruth { value: bad });
    }
    let n = y_true.len() as f64;
    Ok(threshold_pcts
        .iter()
        .map(|&pct| {
            let within = y_true
                .iter()
                .zip(y_pred)
                .filter(|&(&t, &p)| (p - t).abs() / t * 100.0 < pct)
                .count() as f64;
            within / n
        })
        .collect())
}

fn check_paired(y_true: &[f64], y_pred: &[f64]) -> Result<(), EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// A trainable regression backbone and its hyperparameters. Seeds are
/// not stored here; the experiment runner derives a fresh model seed per
/// repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum RegressorSpec {
    Ridge {
        alpha: f64,
    },
    Forest {
        n_estimators: usize,
        max_leaf_nodes: Option<usize>,
    },
    Gbt {
        n_rounds: usize,
        learning_rate: f64,
        max_depth: usize,
    },
    Mlp {
        variation_id: u8,
        epochs: usize,
        patience: usize,
    },
}

impl RegressorSpec {
    /// Default random forest (100 trees, unrestricted leaves).
    pub fn forest_default() -> Self {
        let cfg = ForestConfig::default();
        RegressorSpec::Forest {
            n_estimators: cfg.n_estimators,
            max_leaf_nodes: cfg.max_leaf_nodes,
        }
    }
}

/// A trainable classification backbone; soft votes may nest members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Forest {
        n_estimators: usize,
        max_leaf_nodes: Option<usize>,
    },
    Gbt {
        n_rounds: usize,
        learning_rate: f64,
        max_depth: usize,
    },
    Mlp {
        variation_id: u8,
        epochs: usize,
        patience: usize,
    },
    SoftVote {
        members: Vec<ClassifierSpec>,
    },
}

impl ClassifierSpec {
    /// The forest + boosted-trees + perceptron soft vote used for the
    /// hyperglycemia experiments, sized to stay fast at desk scale.
    pub fn standard_vote() -> Self {
        ClassifierSpec::SoftVote {
            members: vec![
                ClassifierSpec::Forest {
                    n_estimators: 50,
                    max_leaf_nodes: None,
                },
                ClassifierSpec::Gbt {
                    n_rounds: 100,
                    learning_rate: 0.1,
                    max_depth: 3,
                },
                ClassifierSpec::Mlp {
                    variation_id: 1,
                    epochs: 80,
                    patience: 50,
                },
            ],
        }
    }
}

/// What the experiment predicts and with which backbone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum ExperimentTask {
    Regression {
        target: TargetKind,
        model: RegressorSpec,
    },
    Classification {
        model: ClassifierSpec,
    },
}

impl ExperimentTask {
    fn label(&self) -> &'static str {
        match self {
            ExperimentTask::Regression { .. } => "regression",
            ExperimentTask::Classification { .. } => "classification",
        }
    }
}

/// ADASYN settings for train-fold class balancing; the balancing seed is
/// derived per repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceSpec {
    pub k_neighbors: usize,
    pub beta: f64,
}

impl Default for BalanceSpec {
    fn default() -> Self {
        let cfg = AdasynConfig::default();
        Self {
            k_neighbors: cfg.k_neighbors,
            beta: cfg.beta,
        }
    }
}

/// Gaussian-noise augmentation settings for the train fold; the noise
/// seed is derived per repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub sigma: f64,
    pub factor: u32,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        let cfg = AugmentConfig::default();
        Self {
            sigma: cfg.sigma,
            factor: cfg.factor,
        }
    }
}

/// Everything a seeded experiment run depends on. The fingerprint of this
/// struct identifies the run; change any field (including the base seed)
/// and the fingerprint changes with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: ExperimentTask,
    pub split: SplitKind,
    /// Number of seeded repetitions aggregated into one report.
    pub n_seeds: usize,
    /// Parent seed; repetition `i` uses the derived seed `(base_seed, i)`.
    pub base_seed: u64,
    /// Optional train-fold ADASYN balancing (classification only).
    pub balance: Option<BalanceSpec>,
    /// Optional train-fold Gaussian augmentation.
    pub augment: Option<AugmentSpec>,
    /// When true (the default policy) every repetition redraws the split;
    /// when false the split is frozen and only model-side seeds vary.
    pub resplit_per_seed: bool,
}

impl ExperimentConfig {
    /// A regression experiment with the default 80/20 split and 100 seeds.
    pub fn regression(target: TargetKind, model: RegressorSpec) -> Self {
        Self {
            task: ExperimentTask::Regression { target, model },
            split: SplitKind::RegressionFraction { test_fraction: 0.2 },
            n_seeds: DEFAULT_N_SEEDS,
            base_seed: 0,
            balance: None,
            augment: None,
            resplit_per_seed: true,
        }
    }

    /// A classification experiment with train-fold balancing, the default
    /// 80/20 split, and 100 seeds.
    pub fn classification(model: ClassifierSpec) -> Self {
        Self {
            task: ExperimentTask::Classification { model },
            split: SplitKind::RegressionFraction { test_fraction: 0.2 },
            n_seeds: DEFAULT_N_SEEDS,
            base_seed: 0,
            balance: Some(BalanceSpec::default()),
            augment: None,
            resplit_per_seed: true,
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding of this config.
    pub fn fingerprint(&self) -> String {
        let encoded =
            serde_json::to_string(self).expect("experiment config serializes to JSON");
        let digest = Sha256::digest(encoded.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Row provenance of one repetition, recorded so "the test fold holds
/// only real rows" is checkable from the report alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceCounts {
    pub train_real: usize,
    pub train_synthetic: usize,
    pub test_real: usize,
    pub test_synthetic: usize,
}

/// Metrics and provenance for one seeded repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    /// The derived seed this repetition ran under.
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub provenance: ProvenanceCounts,
}

/// Aggregated outcome of a seeded experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    /// "regression" or "classification".
    pub task: String,
    pub config_fingerprint: String,
    /// The global seed every repetition seed was derived from.
    pub base_seed: u64,
    pub resplit_per_seed: bool,
    pub n_seeds: usize,
    pub per_seed: Vec<SeedMetrics>,
    /// Arithmetic mean of each metric over all seeds.
    pub aggregate_mean: BTreeMap<String, f64>,
    /// Population standard deviation of each metric over all seeds.
    pub aggregate_sd: BTreeMap<String, f64>,
}

impl MetricsReport {
    /// Machine-readable form; byte-identical across reruns of the same
    /// config (map keys are ordered, floats round-trip).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics report serializes to JSON")
    }
}

/// Human-readable summary table for one report.
pub fn render_report(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "task: {}  seeds: {} from base {}  resplit_per_seed: {}\nconfig: {}\n\n",
        report.task,
        report.n_seeds,
        report.base_seed,
        report.resplit_per_seed,
        report.config_fingerprint
    ));
    out.push_str(&format!("{:<18}{:>14}{:>14}\n", "metric", "mean", "sd"));
    for (name, mean) in &report.aggregate_mean {
        let sd = report.aggregate_sd.get(name).copied().unwrap_or(0.0);
        out.push_str(&format!("{name:<18}{mean:>14.6}{sd:>14.6}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

// Stream indices for the per-repetition seed derivations.
const STREAM_SPLIT: u64 = 0;
const STREAM_BALANCE: u64 = 1;
const STREAM_AUGMENT: u64 = 2;
const STREAM_MODEL: u64 = 3;

/// Run `config.n_seeds` seeded repetitions on `dataset` and aggregate.
///
/// Each repetition: split, standardize on the train fold, optionally
/// balance and augment the train fold only, fit, predict the test fold,
/// and score. Regression repetitions also score a mean-predictor baseline
/// (`baseline_nrmse`) and the default tolerance curve. Errors are
/// reported with the failing repetition's index attached.
pub fn run_experiment(
    dataset: &Dataset,
    config: &ExperimentConfig,
) -> Result<MetricsReport, EvalError> {
    if config.n_seeds == 0 {
        return Err(EvalError::NoSeeds);
    }
    let fingerprint = config.fingerprint();
    let mut per_seed = Vec::with_capacity(config.n_seeds);
    for rep in 0..config.n_seeds {
        let rep_seed = derive_seed(config.base_seed, rep as u64);
        let outcome = run_repetition(dataset, config, rep_seed).map_err(|e| {
            EvalError::SeedFailure {
                seed_index: rep,
                source: Box::new(e),
            }
        })?;
        per_seed.push(outcome);
    }
    let (aggregate_mean, aggregate_sd) = aggregate(&per_seed);
    Ok(MetricsReport {
        schema_version: 1,
        task: config.task.label().to_string(),
        config_fingerprint: fingerprint,
        base_seed: config.base_seed,
        resplit_per_seed: config.resplit_per_seed,
        n_seeds: config.n_seeds,
        per_seed,
        aggregate_mean,
        aggregate_sd,
    })
}

fn run_repetition(
    dataset: &Dataset,
    config: &ExperimentConfig,
    rep_seed: u64,
) -> Result<SeedMetrics, EvalError> {
    let split_parent = if config.resplit_per_seed {
        rep_seed
    } else {
        config.base_seed
    };
    let spec = SplitSpec {
        kind: config.split,
        seed: derive_seed(split_parent, STREAM_SPLIT),
    };
    let (train, test) = split(dataset, &spec)?;

    let (scaler, mut train_scaled) = standardize(&train)?;
    let test_scaled = scaler.transform_dataset(&test)?;

    if let ExperimentTask::Classification { .. } = config.task {
        if let Some(balance) = &config.balance {
            train_scaled = adasyn_balance(
                &train_scaled,
                &AdasynConfig {
                    k_neighbors: balance.k_neighbors,
                    beta: balance.beta,
                    seed: derive_seed(rep_seed, STREAM_BALANCE),
                },
            )?;
        }
    }
    if let Some(augment) = &config.augment {
        train_scaled = gaussian_augment(
            &train_scaled,
            &AugmentConfig {
                sigma: augment.sigma,
                factor: augment.factor,
                seed: derive_seed(rep_seed, STREAM_AUGMENT),
            },
        )?;
    }

    // The test fold must hold only real rows; resampling touched the
    // train side alone, and the recorded provenance proves it.
    let provenance = ProvenanceCounts {
        train_real: train_scaled.len() - train_scaled.n_synthetic(),
        train_synthetic: train_scaled.n_synthetic(),
        test_real: test_scaled.len() - test_scaled.n_synthetic(),
        test_synthetic: test_scaled.n_synthetic(),
    };
    debug_assert_eq!(provenance.test_synthetic, 0);

    let model_seed = derive_seed(rep_seed, STREAM_MODEL);
    let mut metrics = BTreeMap::new();
    match &config.task {
        ExperimentTask::Regression { target, model } => {
            let y_train = train_scaled.target_column(*target);
            let fitted = fit_regressor(model, train_scaled.features(), &y_train, model_seed)?;
            let y_pred = fitted.predict(test_scaled.features())?;
            let y_test = test_scaled.target_column(*target);
            metrics.insert("nrmse".to_string(), nrmse(&y_test, &y_pred)?);

            let train_mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
            let baseline = vec![train_mean; y_test.len()];
            metrics.insert("baseline_nrmse".to_string(), nrmse(&y_test, &baseline)?);

            let curve = tolerance_curve(&y_test, &y_pred, &DEFAULT_TOLERANCE_PCTS)?;
            for (pct, fraction) in DEFAULT_TOLERANCE_PCTS.iter().zip(curve) {
                metrics.insert(format!("tol_{pct}"), fraction);
            }
        }
        ExperimentTask::Classification { model } => {
            let labels = train_scaled.labels();
            let fitted = fit_classifier(model, train_scaled.features(), &labels, model_seed)?;
            let y_pred = fitted.predict_labels(test_scaled.features())?;
            let y_test = test_scaled.labels();
            let scores = classification_metrics(&y_test, &y_pred)?;
            metrics.insert("accuracy".to_string(), scores.accuracy);
            metrics.insert("precision_macro".to_string(), scores.precision_macro);
            metrics.insert("recall_macro".to_string(), scores.recall_macro);
            metrics.insert("f1_macro".to_string(), scores.f1_macro);
        }
    }
    Ok(SeedMetrics {
        seed: rep_seed,
        metrics,
        provenance,
    })
}

fn aggregate(per_seed: &[SeedMetrics]) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let n = per_seed.len() as f64;
    let mut mean = BTreeMap::new();
    for entry in per_seed {
        for (name, value) in &entry.metrics {
            *mean.entry(name.clone()).or_insert(0.0) += value / n;
        }
    }
    let mut sd = BTreeMap::new();
    for (name, m) in &mean {
        let var = per_seed
            .iter()
            .filter_map(|e| e.metrics.get(name))
            .map(|v| (v - m) * (v - m))
            .sum::<f64>()
            / n;
        sd.insert(name.clone(), var.sqrt());
    }
    (mean, sd)
}

pub(crate) fn fit_regressor(
    spec: &RegressorSpec,
    x: &[Vec<f64>],
    y: &[f64],
    seed: u64,
) -> Result<AnyModel, ModelError> {
    match spec {
        RegressorSpec::Ridge { alpha } => Ok(AnyModel::Ridge(RidgeModel::fit(x, y, *alpha)?)),
        RegressorSpec::Forest {
            n_estimators,
            max_leaf_nodes,
        } => Ok(AnyModel::Forest(ForestModel::fit_regression(
            x,
            y,
            &ForestConfig {
                n_estimators: *n_estimators,
                max_leaf_nodes: *max_leaf_nodes,
                seed,
            },
        )?)),
        RegressorSpec::Gbt {
            n_rounds,
            learning_rate,
            max_depth,
        } => Ok(AnyModel::Gbt(GbtModel::fit_regression(
            x,
            y,
            &GbtConfig {
                n_rounds: *n_rounds,
                learning_rate: *learning_rate,
                max_depth: *max_depth,
                seed,
                ..GbtConfig::default()
            },
        )?)),
        RegressorSpec::Mlp {
            variation_id,
            epochs,
            patience,
        } => Ok(AnyModel::Mlp(MlpModel::fit_regression(
            x,
            y,
            *variation_id,
            &MlpHyper {
                epochs: *epochs,
                patience: *patience,
                seed,
                ..MlpHyper::default()
            },
        )?)),
    }
}

pub(crate) enum FittedClassifier {
    Single(AnyModel),
    Vote(SoftVoteEnsemble),
}

impl FittedClassifier {
    /// The fitted members, ready to drop into a soft-vote ensemble.
    pub(crate) fn into_models(self) -> Vec<AnyModel> {
        match self {
            FittedClassifier::Single(model) => vec![model],
            FittedClassifier::Vote(ensemble) => ensemble.members().to_vec(),
        }
    }

    pub(crate) fn predict_labels(&self, x: &[Vec<f64>]) -> Result<Vec<bool>, EvalError> {
        match self {
            FittedClassifier::Single(model) => {
                let probas = model.predict_proba(x)?;
                Ok(probas.iter().map(|p| p[1] > p[0]).collect())
            }
            FittedClassifier::Vote(ensemble) => {
                let (labels, _) = soft_vote_predict(ensemble, x)?;
                Ok(labels)
            }
        }
    }
}

pub(crate) fn fit_classifier(
    spec: &ClassifierSpec,
    x: &[Vec<f64>],
    labels: &[bool],
    seed: u64,
) -> Result<FittedClassifier, EvalError> {
    match spec {
        ClassifierSpec::SoftVote { members } => {
            let mut fitted = Vec::with_capacity(members.len());
            for (idx, member) in members.iter().enumerate() {
                let member_seed = derive_seed(seed, idx as u64);
                match fit_classifier(member, x, labels, member_seed)? {
                    FittedClassifier::Single(model) => fitted.push(model),
                    FittedClassifier::Vote(inner) => {
                        fitted.extend(inner.members().iter().cloned())
                    }
                }
            }
            Ok(FittedClassifier::Vote(SoftVoteEnsemble::new(fitted)?))
        }
        ClassifierSpec::Forest {
            n_estimators,
            max_leaf_nodes,
        } => Ok(FittedClassifier::Single(AnyModel::Forest(
            ForestModel::fit_classification(
                x,
                labels,
                &ForestConfig {
                    n_estimators: *n_estimators,
                    max_leaf_nodes: *max_leaf_nodes,
                    seed,
                },
            )?,
        ))),
        ClassifierSpec::Gbt {
            n_rounds,
            learning_rate,
            max_depth,
        } => Ok(FittedClassifier::Single(AnyModel::Gbt(
            GbtModel::fit_classification(
                x,
                labels,
                &GbtConfig {
                    n_rounds: *n_rounds,
                    learning_rate: *learning_rate,
                    max_depth: *max_depth,
                    seed,
                    ..GbtConfig::default()
                },
            )?,
        ))),
        ClassifierSpec::Mlp {
            variation_id,
            epochs,
            patience,
        } => Ok(FittedClassifier::Single(AnyModel::Mlp(
            MlpModel::fit_classification(
                x,
                labels,
                *variation_id,
                &MlpHyper {
                    epochs: *epochs,
                    patience: *patience,
                    seed,
                    ..MlpHyper::default()
                },
            )?,
        ))),
    }
}

// ---------------------------------------------------------------------------
// Training-size sweep
// ---------------------------------------------------------------------------

/// The train/test ratios of the training-size sweep, largest test fold
/// first. The 87/13 entry is realized as a balanced 10-per-class test
/// fold rather than a literal fraction.
pub fn training_size_sweep() -> Vec<(&'static str, SplitKind)> {
    vec![
        (
            "70/30",
            SplitKind::RegressionFraction {
                test_fraction: 0.30,
            },
        ),
        (
            "80/20",
            SplitKind::RegressionFraction {
                test_fraction: 0.20,
            },
        ),
        (
            "87/13",
            SplitKind::ClassificationBalancedCount { n_per_class: 10 },
        ),
        (
            "90/10",
            SplitKind::RegressionFraction {
                test_fraction: 0.10,
            },
        ),
        (
            "95/5",
            SplitKind::RegressionFraction {
                test_fraction: 0.05,
            },
        ),
        (
            "99/1",
            SplitKind::RegressionFraction {
                test_fraction: 0.01,
            },
        ),
    ]
}

/// Run the experiment once per sweep ratio, returning one labelled report
/// per ratio. All other configuration fields are taken from `config`.
pub fn run_training_size_sweep(
    dataset: &Dataset,
    config: &ExperimentConfig,
) -> Result<Vec<(String, MetricsReport)>, EvalError> {
    training_size_sweep()
        .into_iter()
        .map(|(label, split)| {
            let mut sized = config.clone();
            sized.split = split;
            run_experiment(dataset, &sized).map(|report| (label.to_string(), report))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Synthetic cohort
// ---------------------------------------------------------------------------

/// Planted response coefficients for the synthetic cohort. The lunch
/// excursion height is
///
/// `h = 25 + carb_slope·net_carbs − fiber_slope·fiber − activity_slope·work_stepping + N(0, noise_sd)`
///
/// floored at zero, and glucose follows a triangular bump peaking `h`
/// above baseline 45 minutes after the meal and returning to baseline at
/// 180 minutes, so each unit of height adds exactly 90 mg/dL·min of AUC.
/// Keeping the coefficients in this struct makes expected effect sizes
/// derivable instead of magic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffects {
    /// mg/dL of excursion height per gram of net carbs.
    pub carb_slope: f64,
    /// mg/dL of height removed per gram of fiber.
    pub fiber_slope: f64,
    /// mg/dL of height removed per minute of work-window stepping.
    pub activity_slope: f64,
    /// Standard deviation of the height noise, mg/dL.
    pub noise_sd: f64,
}

impl Default for PlantedEffects {
    fn default() -> Self {
        Self {
            carb_slope: 0.8,
            fiber_slope: 2.0,
            activity_slope: 0.5,
            noise_sd: 6.0,
        }
    }
}

/// Shape of a synthetic cohort run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthCohortSpec {
    pub n_participants: usize,
    pub effects: PlantedEffects,
    pub seed: u64,
}

impl Default for SynthCohortSpec {
    fn default() -> Self {
        Self {
            n_participants: 10,
            effects: PlantedEffects::default(),
            seed: 0,
        }
    }
}

/// Study phase of each protocol week: one baseline week, two weeks of the
/// first condition, an unphased break week, two weeks of the second.
pub const WEEK_PHASES: [Option<Phase>; 6] = [
    Some(Phase::Baseline),
    Some(Phase::Condition1),
    Some(Phase::Condition1),
    None,
    Some(Phase::Condition2),
    Some(Phase::Condition2),
];

/// First protocol day (a Monday); the generator also emits data for the
/// Sunday before so previous-day activity features exist from day one.
pub fn cohort_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 3, 4).expect("valid protocol start date")
}

/// Generate a deterministic synthetic cohort with a planted response.
///
/// Each participant gets a BMI drawn from N(32.8, 4.5²) clipped to
/// [18, 50], a 15-minute CGM trace over the whole protocol, daily
/// activity scripts, and a lunch plus work record on every phased
/// weekday. Lunch excursions follow [`PlantedEffects`], all glucose is
/// clamped to [40, 400] mg/dL, and every ingest-layer invariant holds by
/// construction. The same spec always yields a byte-identical cohort.
pub fn synth_cohort(spec: &SynthCohortSpec) -> Vec<ParticipantData> {
    assert!(
        spec.effects.carb_slope.is_finite()
            && spec.effects.fiber_slope.is_finite()
            && spec.effects.activity_slope.is_finite()
            && spec.effects.noise_sd.is_finite(),
        "planted effect sizes must be finite"
    );
    (0..spec.n_participants)
        .map(|p| generate_participant(spec, p))
        .collect()
}

/// Piecewise-linear meal bump: rise to `height` at +45 min, back to zero
/// at +180 min.
fn bump(minutes_since_meal: f64, height: f64) -> f64 {
    if (0.0..45.0).contains(&minutes_since_meal) {
        height * minutes_since_meal / 45.0
    } else if (45.0..180.0).contains(&minutes_since_meal) {
        height * (1.0 - (minutes_since_meal - 45.0) / 135.0)
    } else {
        0.0
    }
}

struct DayPlan {
    workday: Option<WorkdayRecord>,
    meal: Option<MealRecord>,
    events: Vec<ActivityEvent>,
    /// (minutes since midnight, excursion height) for the day's meals.
    bumps: Vec<(f64, f64)>,
}

fn generate_participant(spec: &SynthCohortSpec, index: usize) -> ParticipantData {
    let id = format!("synth-{:02}", index + 1);
    let mut rng = stream_rng(spec.seed, index as u64);
    let unit_noise = Normal::<f64>::new(0.0, 1.0).expect("valid normal");

    let bmi = (32.8 + 4.5 * unit_noise.sample(&mut rng)).clamp(18.0, 50.0);
    let glucose_base = 88.0 + rng.gen_range(-6.0..10.0);

    let start = cohort_start_date();
    let mut meals = Vec::new();
    let mut workdays = Vec::new();
    let mut events = Vec::new();
    let mut samples = Vec::new();
    // Day −1 (the Sunday before the protocol) through the last Friday.
    for day_offset in -1..(WEEK_PHASES.len() as i64 * 7) {
        let date = start + Duration::days(day_offset);
        let phase = if day_offset < 0 {
            None
        } else {
            WEEK_PHASES[(day_offset / 7) as usize]
        };
        let is_weekday = !matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        let plan = if let (Some(phase), true) = (phase, is_weekday) {
            plan_workday(&id, date, phase, spec, &mut rng)
        } else {
            plan_leisure_day(date, &mut rng)
        };
        if let Some(workday) = plan.workday {
            workdays.push(workday);
        }
        if let Some(meal) = plan.meal {
            meals.push(meal);
        }
        events.extend(plan.events);

        // 15-minute CGM grid for the day, baseline plus meal bumps.
        let day_start = crate::timeutil::day_start(date);
        for slot in 0..96 {
            let minute = 15.0 * slot as f64;
            let mut glucose = glucose_base + 1.2 * unit_noise.sample(&mut rng);
            for &(meal_minute, height) in &plan.bumps {
                glucose += bump(minute - meal_minute, height);
            }
            let timestamp = day_start + Duration::minutes(minute as i64);
            let sample = CgmSample::new(timestamp, glucose.clamp(40.0, 400.0))
                .expect("generated glucose is in range");
            samples.push(sample);
        }
    }

    let cgm = CgmTrace::new(id.clone(), samples).expect("generated trace is ordered");
    let activity = ActivityEventLog::new(id.clone(), events).expect("generated events are valid");
    assemble_participant(&id, bmi, cgm, activity, meals, workdays)
        .expect("generated cohort satisfies ingest invariants")
}

fn plan_workday(
    id: &str,
    date: NaiveDate,
    phase: Phase,
    spec: &SynthCohortSpec,
    rng: &mut impl Rng,
) -> DayPlan {
    // Work runs nine hours from a 07:30–09:00 start; lunch lands between
    // 12:00 and 13:30, leaving at least three pre-lunch hours.
    let work_start = rng.gen_range(450..=540u32);
    let work_end = work_start + 540;
    let lunch_minute = 720 + rng.gen_range(0..=90u32);
    let work_from_home = rng.gen_bool(0.4);
    let pct_walking = rng.gen_range(5.0..15.0);
    let pct_standing = rng.gen_range(10.0..25.0);
    let pct_sitting = 100.0 - pct_walking - pct_standing;

    let workday = WorkdayRecord::new(
        id,
        date,
        work_start,
        work_end,
        work_from_home,
        pct_sitting,
        pct_standing,
        pct_walking,
        phase,
    )
    .expect("generated workday is valid");

    // Morning activity block layout; all work-window stepping happens
    // before lunch, so the stepping feature equals the planted lever.
    let step_min = rng.gen_range(5.0..45.0);
    let stand_min = rng.gen_range(10.0..40.0);
    let desk_min = rng.gen_range(10.0..30.0);
    let day_start = crate::timeutil::day_start(date);
    let at = |minute: f64| crate::timeutil::add_minutes(day_start, minute);
    let start_f = f64::from(work_start);
    let lunch_f = f64::from(lunch_minute);
    let end_f = f64::from(work_end);
    let afternoon_stand = rng.gen_range(10.0..30.0);

    let mut events = Vec::new();
    let mut push = |start_min: f64, dur_min: f64, kind: ActivityKind| {
        if dur_min > 0.0 {
            events.push(
                ActivityEvent::new(at(start_min), dur_min * 60.0, kind)
                    .expect("generated event is valid"),
            );
        }
    };
    push(0.0, 420.0, ActivityKind::PrimaryLying);
    push(420.0, start_f - 420.0, ActivityKind::Sedentary);
    push(start_f, desk_min, ActivityKind::Sedentary);
    push(start_f + desk_min, step_min, ActivityKind::Stepping);
    push(start_f + desk_min + step_min, stand_min, ActivityKind::Standing);
    push(
        start_f + desk_min + step_min + stand_min,
        lunch_f - start_f - desk_min - step_min - stand_min,
        ActivityKind::Sedentary,
    );
    push(lunch_f, 30.0, ActivityKind::Sedentary);
    push(lunch_f + 30.0, afternoon_stand, ActivityKind::Standing);
    push(
        lunch_f + 30.0 + afternoon_stand,
        end_f - lunch_f - 30.0 - afternoon_stand,
        ActivityKind::Sedentary,
    );
    push(end_f, 1320.0 - end_f, ActivityKind::Sedentary);
    push(1320.0, 120.0, ActivityKind::PrimaryLying);

    // Lunch macros; calories follow the 4/4/9 kcal rule plus a little
    // non-macro energy so the fat-calorie bound always holds.
    let total_carbs = rng.gen_range(30.0..120.0f64);
    let fiber = rng.gen_range(0.0..10.0f64);
    let sugar = total_carbs * rng.gen_range(0.15..0.45);
    let net_carbs = total_carbs - fiber;
    let fat = rng.gen_range(5.0..40.0f64);
    let protein = rng.gen_range(10.0..50.0f64);
    let macros = MacroProfile {
        calories: 4.0 * (total_carbs + protein) + 9.0 * fat + rng.gen_range(0.0..30.0),
        calories_from_fat: 9.0 * fat,
        saturated_fat_g: fat * rng.gen_range(0.2..0.5),
        trans_fat_g: rng.gen_range(0.0..1.5),
        cholesterol_mg: rng.gen_range(0.0..150.0),
        sodium_mg: rng.gen_range(200.0..1500.0),
        total_carbs_g: total_carbs,
        sugar_g: sugar,
        net_carbs_g: net_carbs,
        fat_g: fat,
        protein_g: protein,
        fiber_g: fiber,
    };
    let meal = MealRecord::new(
        id,
        at(lunch_f),
        MealKind::Lunch,
        macros,
    )
    .expect("generated meal is valid");

    // Planted response: excursion height rises with net carbs and falls
    // with fiber and pre-lunch stepping.
    let effects = spec.effects;
    let noise = Normal::new(0.0, effects.noise_sd.max(f64::MIN_POSITIVE))
        .expect("valid noise distribution");
    let lunch_height = (25.0 + effects.carb_slope * net_carbs
        - effects.fiber_slope * fiber
        - effects.activity_slope * step_min
        + noise.sample(rng))
    .max(0.0);
    let breakfast_height = rng.gen_range(5.0..20.0);
    let dinner_height = rng.gen_range(10.0..30.0);

    DayPlan {
        workday: Some(workday),
        meal: Some(meal),
        events,
        bumps: vec![
            (480.0, breakfast_height),
            (lunch_f, lunch_height),
            (1140.0, dinner_height),
        ],
    }
}

fn plan_leisure_day(date: NaiveDate, rng: &mut impl Rng) -> DayPlan {
    let day_start = crate::timeutil::day_start(date);
    let at = |minute: f64| crate::timeutil::add_minutes(day_start, minute);
    let walk_min = rng.gen_range(10.0..40.0);
    let stand_min = rng.gen_range(10.0..30.0);

    let mut events = Vec::new();
    let mut push = |start_min: f64, dur_min: f64, kind: ActivityKind| {
        if dur_min > 0.0 {
            events.push(
                ActivityEvent::new(at(start_min), dur_min * 60.0, kind)
                    .expect("generated event is valid"),
            );
        }
    };
    push(0.0, 450.0, ActivityKind::PrimaryLying);
    push(450.0, 150.0, ActivityKind::Sedentary);
    push(600.0, walk_min, ActivityKind::Stepping);
    push(600.0 + walk_min, stand_min, ActivityKind::Standing);
    push(
        600.0 + walk_min + stand_min,
        1320.0 - 600.0 - walk_min - stand_min,
        ActivityKind::Sedentary,
    );
    push(1320.0, 120.0, ActivityKind::PrimaryLying);

    let breakfast_height = rng.gen_range(5.0..20.0);
    let dinner_height = rng.gen_range(10.0..30.0);
    DayPlan {
        workday: None,
        meal: None,
        events,
        bumps: vec![(480.0, breakfast_height), (1140.0, dinner_height)],
    }
}
