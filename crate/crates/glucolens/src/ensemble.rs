//! Soft-voting classifier ensembles and the hybrid regression pipelines
//! that mix trainable backbones with language-model predictions.
//!
//! The hybrid family covers five modes: the plain backbone, language-model
//! output used directly, the backbone fed six extra prediction columns, the
//! backbone fed only the best provider's column, and that last variant
//! trained on Gaussian-augmented data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    standardize, Dataset, FeatureError, FeatureVector, Scaler, TargetKind,
};
use crate::llm::{
    build_prompt, query, LlmCache, LlmClient, LlmError, LlmPrediction, PredictionTarget,
    PromptTemplate, Transport,
};
use crate::models::{
    AnyModel, ForestConfig, ForestModel, GbtConfig, GbtModel, ModelError, Task,
};
use crate::resampling::{gaussian_augment, AugmentConfig, ResampleError};

/// Provider whose predictions feed the single-column hybrid modes.
pub const BEST_PROVIDER: &str = "claude_opus4";

/// Provider ids required by the six-column hybrid mode, in column order.
pub const HYBRID_PROVIDERS: [&str; 6] = [
    "gpt35_turbo",
    "gpt4",
    "claude_opus4",
    "deepseek_v3",
    "gemini_flash2",
    "grok3",
];

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("ensemble needs at least one member")]
    EmptyEnsemble,
    #[error("member {index} expects {found} features, ensemble expects {expected}")]
    SchemaMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("member {index} is not a classifier")]
    NotAClassifier { index: usize },
    #[error("no prediction column for provider {provider_id}")]
    MissingProvider { provider_id: String },
    #[error("language-model-only mode needs exactly one provider, got {found}")]
    AmbiguousProvider { found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Unweighted soft-voting classifier over fitted members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftVoteEnsemble {
    members: Vec<AnyModel>,
}

impl SoftVoteEnsemble {
    /// Wrap fitted classifiers; they must agree on the feature schema.
    pub fn new(members: Vec<AnyModel>) -> Result<Self, EnsembleError> {
        let first = members.first().ok_or(EnsembleError::EmptyEnsemble)?;
        let expected = first.n_features();
        for (index, member) in members.iter().enumerate() {
            if member.task() != Task::BinaryClassification {
                return Err(EnsembleError::NotAClassifier { index });
            }
            if member.n_features() != expected {
                return Err(EnsembleError::SchemaMismatch {
                    index,
                    expected,
                    found: member.n_features(),
                });
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[AnyModel] {
        &self.members
    }

    pub fn n_features(&self) -> usize {
        self.members[0].n_features()
    }
}

/// Vote: probabilities are the unweighted mean over members, the label is
/// the argmax, and an exact tie goes to class 0 (no hyperglycemia).
pub fn soft_vote_predict(
    ensemble: &SoftVoteEnsemble,
    x: &[Vec<f64>],
) -> Result<(Vec<bool>, Vec<[f64; 2]>), EnsembleError> {
    let mut mean = vec![[0.0, 0.0]; x.len()];
    for member in &ensemble.members {
        for (acc, p) in mean.iter_mut().zip(member.predict_proba(x)?) {
            acc[0] += p[0];
            acc[1] += p[1];
        }
    }
    let k = ensemble.members.len() as f64;
    for p in &mut mean {
        p[0] /= k;
        p[1] /= k;
    }
    let labels = mean.iter().map(|p| p[1] > p[0]).collect();
    Ok((labels, mean))
}

/// The five prediction pipelines built around one regression backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridMode {
    /// Backbone only, no language-model input.
    GlyBase,
    /// One provider's prediction used directly.
    GlyLlm,
    /// Backbone plus six provider-prediction columns.
    GlyHybrid,
    /// Backbone plus the best provider's column.
    GlyHybridV2,
    /// `GlyHybridV2` trained on Gaussian-augmented data.
    GlyMax,
}

impl HybridMode {
    pub const ALL: [HybridMode; 5] = [
        HybridMode::GlyBase,
        HybridMode::GlyLlm,
        HybridMode::GlyHybrid,
        HybridMode::GlyHybridV2,
        HybridMode::GlyMax,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            HybridMode::GlyBase => "gly-base",
            HybridMode::GlyLlm => "gly-llm",
            HybridMode::GlyHybrid => "gly-hybrid",
            HybridMode::GlyHybridV2 => "gly-hybrid-v2",
            HybridMode::GlyMax => "gly-max",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        let canon: String = token
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Self::ALL.into_iter().find(|m| {
            m.as_str()
                .chars()
                .filter(|c| c.is_ascii_alphanumeric())
                .collect::<String>()
                == canon
        })
    }
}

impl std::fmt::Display for HybridMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One provider's prediction for every row of a dataset, in row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderPredictions {
    pub provider_id: String,
    pub values: Vec<f64>,
}

fn find_column<'a>(
    columns: &'a [ProviderPredictions],
    provider_id: &str,
) -> Result<&'a ProviderPredictions, EnsembleError> {
    columns
        .iter()
        .find(|c| c.provider_id == provider_id)
        .ok_or_else(|| EnsembleError::MissingProvider {
            provider_id: provider_id.to_string(),
        })
}

/// Feature column name for a provider's predictions.
pub fn llm_column_name(provider_id: &str) -> String {
    format!("llm_{provider_id}")
}

/// Append the language-model columns a hybrid mode calls for.
///
/// The base feature order is preserved as a prefix; the six-column mode
/// appends every provider in [`HYBRID_PROVIDERS`] order, the single-column
/// modes append only [`BEST_PROVIDER`], and the base and model-only modes
/// return the dataset unchanged.
pub fn extend_dataset_with_llm(
    dataset: &Dataset,
    columns: &[ProviderPredictions],
    mode: HybridMode,
) -> Result<Dataset, EnsembleError> {
    let mut out = dataset.clone();
    let wanted: &[&str] = match mode {
        HybridMode::GlyBase | HybridMode::GlyLlm => &[],
        HybridMode::GlyHybrid => &HYBRID_PROVIDERS,
        HybridMode::GlyHybridV2 | HybridMode::GlyMax => &[BEST_PROVIDER],
    };
    for provider_id in wanted {
        let column = find_column(columns, provider_id)?;
        out.append_feature_column(llm_column_name(provider_id), &column.values)?;
    }
    Ok(out)
}

/// Single-vector counterpart of [`extend_dataset_with_llm`] for
/// prediction-time flows; returns names and values with the base features
/// as a prefix.
pub fn extend_features_with_llm(
    base: &FeatureVector,
    predictions: &[LlmPrediction],
    mode: HybridMode,
) -> Result<(Vec<String>, Vec<f64>), EnsembleError> {
    let mut names: Vec<String> = base.names().iter().map(|s| s.to_string()).collect();
    let mut values = base.values.clone();
    let wanted: &[&str] = match mode {
        HybridMode::GlyBase | HybridMode::GlyLlm => &[],
        HybridMode::GlyHybrid => &HYBRID_PROVIDERS,
        HybridMode::GlyHybridV2 | HybridMode::GlyMax => &[BEST_PROVIDER],
    };
    for provider_id in wanted {
        let prediction = predictions
            .iter()
            .find(|p| p.provider_id == *provider_id)
            .ok_or_else(|| EnsembleError::MissingProvider {
                provider_id: provider_id.to_string(),
            })?;
        names.push(llm_column_name(provider_id));
        values.push(prediction.value);
    }
    Ok((names, values))
}

/// Query one provider for every row of a dataset, via the cache.
///
/// Rows must carry exactly the canonical features of the dataset's set kind
/// (extend after, not before, collecting predictions).
pub fn llm_predictions_for<T: Transport>(
    dataset: &Dataset,
    template: &PromptTemplate,
    target: PredictionTarget,
    client: &mut LlmClient<T>,
    cache: &mut LlmCache,
) -> Result<ProviderPredictions, EnsembleError> {
    let mut values = Vec::with_capacity(dataset.len());
    for row in dataset.features() {
        let features = FeatureVector::new(dataset.set_kind(), row.clone())?;
        let prompt = build_prompt(template, &features, target);
        values.push(query(client, &prompt, cache)?.value);
    }
    Ok(ProviderPredictions {
        provider_id: client.provider_id().to_string(),
        values,
    })
}

/// Trainable regressor family behind the hybrid modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    Forest,
    Gbt,
}

impl Backbone {
    fn fit(
        self,
        x: &[Vec<f64>],
        y: &[f64],
        seed: u64,
    ) -> Result<AnyModel, ModelError> {
        match self {
            Backbone::Forest => {
                let cfg = ForestConfig {
                    seed,
                    ..ForestConfig::default()
                };
                Ok(AnyModel::Forest(ForestModel::fit_regression(x, y, &cfg)?))
            }
            Backbone::Gbt => {
                let cfg = GbtConfig {
                    seed,
                    ..GbtConfig::default()
                };
                Ok(AnyModel::Gbt(GbtModel::fit_regression(x, y, &cfg)?))
            }
        }
    }
}

/// Result of one hybrid regression run.
#[derive(Debug)]
pub struct HybridOutcome {
    /// The fitted backbone; absent in the model-only mode.
    pub model: Option<AnyModel>,
    /// Scaler fitted on the (extended) training features, when one exists.
    pub scaler: Option<Scaler>,
    /// Predictions for the test rows, in row order.
    pub predictions: Vec<f64>,
    /// Training rows actually fitted on, after any augmentation.
    pub train_rows: usize,
}

/// Run one hybrid pipeline on an upstream train/test split.
///
/// Steps, in order: extend features with the language-model columns the
/// mode calls for, standardize on the training rows (prediction columns are
/// scaled like any other feature), augment the training rows for the
/// augmented mode, then fit the backbone and predict the test rows. The
/// model-only mode skips all of that and returns the provider's test-row
/// predictions directly.
#[allow(clippy::too_many_arguments)]
pub fn run_hybrid_regression(
    mode: HybridMode,
    train: &Dataset,
    test: &Dataset,
    llm_train: &[ProviderPredictions],
    llm_test: &[ProviderPredictions],
    target: TargetKind,
    backbone: Backbone,
    augment_cfg: &AugmentConfig,
    seed: u64,
) -> Result<HybridOutcome, EnsembleError> {
    if mode == HybridMode::GlyLlm {
        if llm_test.len() != 1 {
            return Err(EnsembleError::AmbiguousProvider {
                found: llm_test.len(),
            });
        }
        return Ok(HybridOutcome {
            model: None,
            scaler: None,
            predictions: llm_test[0].values.clone(),
            train_rows: 0,
        });
    }

    let train_ext = extend_dataset_with_llm(train, llm_train, mode)?;
    let test_ext = extend_dataset_with_llm(test, llm_test, mode)?;
    let (scaler, train_scaled) = standardize(&train_ext)?;
    let test_scaled = scaler.transform_dataset(&test_ext)?;

    let fit_set = if mode == HybridMode::GlyMax {
        gaussian_augment(&train_scaled, augment_cfg)?
    } else {
        train_scaled
    };

    let model = backbone.fit(fit_set.features(), &fit_set.target_column(target), seed)?;
    let predictions = model.predict(test_scaled.features())?;
    Ok(HybridOutcome {
        model: Some(model),
        scaler: Some(scaler),
        predictions,
        train_rows: fit_set.len(),
    })
}
