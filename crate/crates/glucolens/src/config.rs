//! The TOML configuration file that drives every CLI subcommand.
//!
//! One document is the single source of truth for an experiment;
//! command-line flags override individual fields, and the precedence is
//! always flag > config file > built-in default. Unknown keys are
//! rejected so a typo cannot silently fall back to a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counterfactual::{CfRequest, DEFAULT_IMMUTABLE, DEFAULT_INTEGER};
use crate::ensemble::HybridMode;
use crate::eval::{
    BalanceSpec, ClassifierSpec, PlantedEffects, RegressorSpec, SplitKind, SynthCohortSpec,
};
use crate::features::{FeatureSetKind, TargetKind};
use crate::glycemic::{HyperglycemiaPolicy, TargetConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path} is not valid TOML: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// What the pipeline predicts: one of the regression targets or the
/// hyperglycemia label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetChoice {
    #[default]
    Auc,
    Iauc,
    MaxBgl,
    Hyper,
}

impl TargetChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetChoice::Auc => "auc",
            TargetChoice::Iauc => "iauc",
            TargetChoice::MaxBgl => "max_bgl",
            TargetChoice::Hyper => "hyper",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "auc" => Some(TargetChoice::Auc),
            "iauc" => Some(TargetChoice::Iauc),
            "max_bgl" | "maxbgl" => Some(TargetChoice::MaxBgl),
            "hyper" | "hyperglycemia" => Some(TargetChoice::Hyper),
            _ => None,
        }
    }

    /// The regression target, or `None` for the classification label.
    pub fn regression_target(&self) -> Option<TargetKind> {
        match self {
            TargetChoice::Auc => Some(TargetKind::Auc),
            TargetChoice::Iauc => Some(TargetKind::Iauc),
            TargetChoice::MaxBgl => Some(TargetKind::MaxBgl),
            TargetChoice::Hyper => None,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, TargetChoice::Hyper)
    }
}

impl std::fmt::Display for TargetChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Paths to the raw data sources. The roster CSV lists
/// `participant_id,bmi,cgm_file,activity_file` with file paths resolved
/// relative to the roster's own directory; the food and work logs are
/// shared streams carrying their own participant ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsSection {
    pub participants: PathBuf,
    pub food_log: PathBuf,
    pub work_log: PathBuf,
}

/// Synthetic cohort settings (used when no raw inputs are configured).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_participants: usize,
    pub carb_slope: f64,
    pub fiber_slope: f64,
    pub activity_slope: f64,
    pub noise_sd: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let effects = PlantedEffects::default();
        Self {
            n_participants: 10,
            carb_slope: effects.carb_slope,
            fiber_slope: effects.fiber_slope,
            activity_slope: effects.activity_slope,
            noise_sd: effects.noise_sd,
        }
    }
}

impl SynthSection {
    pub fn to_spec(&self, seed: u64) -> SynthCohortSpec {
        SynthCohortSpec {
            n_participants: self.n_participants,
            effects: PlantedEffects {
                carb_slope: self.carb_slope,
                fiber_slope: self.fiber_slope,
                activity_slope: self.activity_slope,
                noise_sd: self.noise_sd,
            },
            seed,
        }
    }
}

/// Postprandial target computation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetsSection {
    pub window_min: f64,
    pub max_gap_min: f64,
    pub hyper_threshold: f64,
    pub hyper_policy: HyperglycemiaPolicy,
}

impl Default for TargetsSection {
    fn default() -> Self {
        let cfg = TargetConfig::default();
        Self {
            window_min: cfg.window_min,
            max_gap_min: cfg.max_gap_min,
            hyper_threshold: cfg.hyper_threshold,
            hyper_policy: cfg.hyper_policy,
        }
    }
}

impl TargetsSection {
    pub fn to_target_config(&self) -> TargetConfig {
        TargetConfig {
            window_min: self.window_min,
            max_gap_min: self.max_gap_min,
            hyper_threshold: self.hyper_threshold,
            hyper_policy: self.hyper_policy,
        }
    }
}

/// Backbone choice plus the union of all model hyperparameters; each
/// backbone reads only its own fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `rf`, `gbt`, `mlp`, `ridge`, or (classification only) `vote`.
    pub kind: String,
    /// Random-forest tree count.
    pub n_est: usize,
    /// Random-forest best-first leaf cap.
    pub max_leaf_nodes: Option<usize>,
    /// Ridge regularization strength.
    pub alpha: f64,
    /// Boosting rounds.
    pub n_rounds: usize,
    /// Boosting shrinkage.
    pub learning_rate: f64,
    /// Boosted-tree depth cap.
    pub max_depth: usize,
    /// Perceptron architecture variation (1–13).
    pub variation: u8,
    pub epochs: usize,
    pub patience: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: "rf".to_string(),
            n_est: 100,
            max_leaf_nodes: None,
            alpha: 1.0,
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            variation: 1,
            epochs: 200,
            patience: 50,
        }
    }
}

impl ModelSection {
    pub fn to_regressor_spec(&self) -> Result<RegressorSpec, ConfigError> {
        match self.kind.as_str() {
            "rf" | "forest" => Ok(RegressorSpec::Forest {
                n_estimators: self.n_est,
                max_leaf_nodes: self.max_leaf_nodes,
            }),
            "gbt" => Ok(RegressorSpec::Gbt {
                n_rounds: self.n_rounds,
                learning_rate: self.learning_rate,
                max_depth: self.max_depth,
            }),
            "mlp" => Ok(RegressorSpec::Mlp {
                variation_id: self.variation,
                epochs: self.epochs,
                patience: self.patience,
            }),
            "ridge" => Ok(RegressorSpec::Ridge { alpha: self.alpha }),
            "vote" => Err(ConfigError::Invalid(
                "model kind `vote` is classification-only".to_string(),
            )),
            other => Err(ConfigError::Invalid(format!(
                "unknown model kind `{other}` (expected rf, gbt, mlp, ridge, or vote)"
            ))),
        }
    }

    pub fn to_classifier_spec(&self) -> Result<ClassifierSpec, ConfigError> {
        match self.kind.as_str() {
            "rf" | "forest" => Ok(ClassifierSpec::Forest {
                n_estimators: self.n_est,
                max_leaf_nodes: self.max_leaf_nodes,
            }),
            "gbt" => Ok(ClassifierSpec::Gbt {
                n_rounds: self.n_rounds,
                learning_rate: self.learning_rate,
                max_depth: self.max_depth,
            }),
            "mlp" => Ok(ClassifierSpec::Mlp {
                variation_id: self.variation,
                epochs: self.epochs,
                patience: self.patience,
            }),
            "vote" => Ok(ClassifierSpec::standard_vote()),
            "ridge" => Err(ConfigError::Invalid(
                "model kind `ridge` is regression-only".to_string(),
            )),
            other => Err(ConfigError::Invalid(format!(
                "unknown model kind `{other}` (expected rf, gbt, mlp, ridge, or vote)"
            ))),
        }
    }
}

/// Test-fold sizing; exactly one of the two fields may be set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub test_fraction: Option<f64>,
    pub n_per_class: Option<usize>,
}

impl SplitSection {
    pub fn to_split_kind(&self) -> Result<SplitKind, ConfigError> {
        match (self.test_fraction, self.n_per_class) {
            (Some(_), Some(_)) => Err(ConfigError::Invalid(
                "set either split.test_fraction or split.n_per_class, not both".to_string(),
            )),
            (Some(fraction), None) => Ok(SplitKind::RegressionFraction {
                test_fraction: fraction,
            }),
            (None, Some(count)) => Ok(SplitKind::ClassificationBalancedCount {
                n_per_class: count,
            }),
            (None, None) => Ok(SplitKind::RegressionFraction { test_fraction: 0.2 }),
        }
    }
}

/// Train-fold resampling switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResamplingSection {
    /// ADASYN-balance classification train folds.
    pub balance: bool,
    pub k_neighbors: usize,
    pub beta: f64,
    /// Gaussian-augment train folds.
    pub augment: bool,
    pub sigma: f64,
    pub factor: u32,
}

impl Default for ResamplingSection {
    fn default() -> Self {
        Self {
            balance: true,
            k_neighbors: 5,
            beta: 1.0,
            augment: false,
            sigma: 0.05,
            factor: 1,
        }
    }
}

impl ResamplingSection {
    pub fn balance_spec(&self) -> Option<BalanceSpec> {
        self.balance.then_some(BalanceSpec {
            k_neighbors: self.k_neighbors,
            beta: self.beta,
        })
    }

    pub fn augment_spec(&self) -> Option<crate::eval::AugmentSpec> {
        self.augment.then_some(crate::eval::AugmentSpec {
            sigma: self.sigma,
            factor: self.factor,
        })
    }
}

/// Language-model bridge settings. Credentials never live here; they
/// come from per-provider environment variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmSection {
    pub provider: String,
    /// Hybrid mode name, e.g. `gly-base` or `gly-hybrid-v2`.
    pub mode: String,
    pub cache: PathBuf,
    /// Optional prompt template override; the built-in template is used
    /// when absent.
    pub template: Option<PathBuf>,
}

impl Default for LlmSection {
    fn default() -> Self {
        Self {
            provider: crate::ensemble::BEST_PROVIDER.to_string(),
            mode: HybridMode::GlyBase.as_str().to_string(),
            cache: PathBuf::from("llm_cache.json"),
            template: None,
        }
    }
}

/// Counterfactual search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfSection {
    pub k: usize,
    pub budget: usize,
    pub proximity_weight: f64,
    pub diversity_weight: f64,
    /// Features the search must not change.
    pub immutable: Vec<String>,
    /// Features snapped to whole numbers.
    pub integer: Vec<String>,
}

impl Default for CfSection {
    fn default() -> Self {
        let request = CfRequest::new(false, 3);
        Self {
            k: request.k,
            budget: request.budget,
            proximity_weight: request.proximity_weight,
            diversity_weight: request.diversity_weight,
            immutable: DEFAULT_IMMUTABLE.iter().map(|s| s.to_string()).collect(),
            integer: DEFAULT_INTEGER.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl CfSection {
    pub fn to_request(&self, target_label: bool, seed: u64) -> CfRequest {
        CfRequest {
            target_label,
            k: self.k,
            budget: self.budget,
            seed,
            proximity_weight: self.proximity_weight,
            diversity_weight: self.diversity_weight,
        }
    }
}

/// The whole configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    /// Global seed; every stage derives its own stream from it.
    pub seed: u64,
    /// Repetitions per evaluation report.
    pub n_seeds: usize,
    pub output_dir: PathBuf,
    pub feature_set: FeatureSetKind,
    pub target: TargetChoice,
    /// Raw data sources; omit to work from a synthetic cohort.
    pub inputs: Option<InputsSection>,
    pub synth: SynthSection,
    pub targets: TargetsSection,
    pub model: ModelSection,
    pub split: SplitSection,
    pub resampling: ResamplingSection,
    pub llm: LlmSection,
    pub counterfactual: CfSection,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_seeds: 100,
            output_dir: PathBuf::from("out"),
            feature_set: FeatureSetKind::All,
            target: TargetChoice::Auc,
            inputs: None,
            synth: SynthSection::default(),
            targets: TargetsSection::default(),
            model: ModelSection::default(),
            split: SplitSection::default(),
            resampling: ResamplingSection::default(),
            llm: LlmSection::default(),
            counterfactual: CfSection::default(),
        }
    }
}

impl CliConfig {
    /// Load and validate a config document.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: CliConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Parse from a TOML string (mainly for tests and examples).
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: CliConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<inline>"),
            detail: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Check every cross-field rule before any work starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_seeds == 0 {
            return Err(ConfigError::Invalid("n_seeds must be at least 1".into()));
        }
        if let Some(fraction) = self.split.test_fraction {
            if !fraction.is_finite() || fraction <= 0.0 || fraction >= 1.0 {
                return Err(ConfigError::Invalid(format!(
                    "split.test_fraction {fraction} must lie in (0, 1)"
                )));
            }
        }
        if self.split.n_per_class == Some(0) {
            return Err(ConfigError::Invalid(
                "split.n_per_class must be at least 1".into(),
            ));
        }
        self.split.to_split_kind()?;
        if !(0.0 < self.resampling.beta && self.resampling.beta <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "resampling.beta {} must lie in (0, 1]",
                self.resampling.beta
            )));
        }
        if self.resampling.sigma < 0.0 || !self.resampling.sigma.is_finite() {
            return Err(ConfigError::Invalid(format!(
                "resampling.sigma {} must be a non-negative number",
                self.resampling.sigma
            )));
        }
        if self.synth.n_participants == 0 {
            return Err(ConfigError::Invalid(
                "synth.n_participants must be at least 1".into(),
            ));
        }
        for (name, value) in [
            ("synth.carb_slope", self.synth.carb_slope),
            ("synth.fiber_slope", self.synth.fiber_slope),
            ("synth.activity_slope", self.synth.activity_slope),
            ("synth.noise_sd", self.synth.noise_sd),
        ] {
            if !value.is_finite() {
                return Err(ConfigError::Invalid(format!("{name} must be finite")));
            }
        }
        if self.counterfactual.k == 0 {
            return Err(ConfigError::Invalid(
                "counterfactual.k must be at least 1".into(),
            ));
        }
        HybridMode::parse(&self.llm.mode).ok_or_else(|| {
            ConfigError::Invalid(format!("unknown llm.mode `{}`", self.llm.mode))
        })?;
        // Surface model-kind typos now rather than at fit time.
        if self.target.is_classification() {
            self.model.to_classifier_spec()?;
        } else {
            self.model.to_regressor_spec()?;
        }
        Ok(())
    }

    pub fn hybrid_mode(&self) -> HybridMode {
        HybridMode::parse(&self.llm.mode).expect("mode validated at load time")
    }
}
