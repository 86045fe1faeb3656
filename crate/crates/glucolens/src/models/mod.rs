//! Trainable backbones implemented from first principles: ridge
//! regression, bagged CART forests, gradient-boosted trees, and
//! multilayer perceptrons, plus a versioned serialization container.
//!
//! Every fit is deterministic given its seed; trained models are
//! immutable and safe to share across threads for prediction.

mod forest;
mod gbt;
mod mlp;
mod ridge;
pub(crate) mod tree;

pub use forest::{ForestConfig, ForestModel};
pub use gbt::{GbtConfig, GbtModel};
pub use mlp::{gradient_check, variation_layers, MlpHyper, MlpModel, MLP_VARIATIONS};
pub use ridge::RidgeModel;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The ridge regularization grid used by the replication presets.
pub const RIDGE_ALPHA_GRID: [f64; 3] = [1.0, 0.1, 0.01];
/// The forest-size grid used by the replication presets.
pub const FOREST_SIZE_GRID: [usize; 3] = [10, 50, 100];
/// The forest leaf-cap grid used by the interpretability experiments.
pub const FOREST_LEAF_CAPS: [usize; 3] = [24, 48, 96];

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("training data is empty")]
    EmptyData,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("system is singular; add regularization")]
    SingularSystem,
    #[error("training loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("no MLP variation {variation_id}; valid ids are 1-13")]
    InvalidVariation { variation_id: u8 },
    #[error("invalid hyperparameter: {detail}")]
    InvalidHyper { detail: String },
    #[error("model trained for {found:?} cannot serve {expected:?}")]
    WrongTask { expected: Task, found: Task },
    #[error("serialization failed: {detail}")]
    Serialization { detail: String },
}

/// What a model was trained to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    BinaryClassification,
}

/// Any trained model, tagged by kind for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyModel {
    Ridge(RidgeModel),
    Forest(ForestModel),
    Mlp(MlpModel),
    Gbt(GbtModel),
}

impl AnyModel {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Ridge(_) => "ridge",
            AnyModel::Forest(_) => "forest",
            AnyModel::Mlp(_) => "mlp",
            AnyModel::Gbt(_) => "gbt",
        }
    }

    pub fn task(&self) -> Task {
        match self {
            AnyModel::Ridge(_) => Task::Regression,
            AnyModel::Forest(m) => m.task(),
            AnyModel::Mlp(m) => m.task(),
            AnyModel::Gbt(m) => m.task(),
        }
    }

    /// Width of the feature rows this model was trained on.
    pub fn n_features(&self) -> usize {
        match self {
            AnyModel::Ridge(m) => m.weights.len(),
            AnyModel::Forest(m) => m.n_features(),
            AnyModel::Mlp(m) => m.n_features(),
            AnyModel::Gbt(m) => m.n_features(),
        }
    }

    /// Regression predictions (errors for classification models).
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        match self {
            AnyModel::Ridge(m) => m.predict(x),
            AnyModel::Forest(m) => m.predict(x),
            AnyModel::Mlp(m) => m.predict(x),
            AnyModel::Gbt(m) => m.predict(x),
        }
    }

    /// Class probabilities (errors for regression models).
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<[f64; 2]>, ModelError> {
        match self {
            AnyModel::Ridge(_) => Err(ModelError::WrongTask {
                expected: Task::BinaryClassification,
                found: Task::Regression,
            }),
            AnyModel::Forest(m) => m.predict_proba(x),
            AnyModel::Mlp(m) => m.predict_proba(x),
            AnyModel::Gbt(m) => m.predict_proba(x),
        }
    }
}

/// On-disk envelope: a format version wrapping the tagged model.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    model: AnyModel,
}

/// Serialize a model as versioned JSON; floats survive a round-trip
/// bit-exactly.
pub fn save_model<W: std::io::Write>(model: &AnyModel, writer: W) -> Result<(), ModelError> {
    let envelope = Envelope {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    serde_json::to_writer_pretty(writer, &envelope).map_err(|e| ModelError::Serialization {
        detail: e.to_string(),
    })
}

/// Load a model saved by [`save_model`], rejecting unknown versions.
pub fn load_model<R: std::io::Read>(reader: R) -> Result<AnyModel, ModelError> {
    let envelope: Envelope =
        serde_json::from_reader(reader).map_err(|e| ModelError::Serialization {
            detail: e.to_string(),
        })?;
    if envelope.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelError::Serialization {
            detail: format!(
                "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
                envelope.format_version
            ),
        });
    }
    Ok(envelope.model)
}
