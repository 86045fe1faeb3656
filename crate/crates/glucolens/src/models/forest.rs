//! Bagged CART forests for regression and binary classification.
//!
//! Training rows are first put into a canonical lexicographic order, and
//! each tree draws its bootstrap sample from an RNG stream derived from
//! `(seed, tree index)` — so fits are deterministic, reproducible under
//! training-row permutation, and per-tree parallelizable in principle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{ClassificationTarget, GrowthConfig, RegressionTarget, Tree};
use super::{ModelError, Task};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_estimators: usize,
    /// Best-first leaf cap per tree; `None` grows unrestricted.
    pub max_leaf_nodes: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_leaf_nodes: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ForestTrees {
    Regression(Vec<Tree<f64>>),
    Classification(Vec<Tree<[f64; 2]>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: ForestTrees,
    config: ForestConfig,
    n_features: usize,
}

/// Indices sorting rows lexicographically by features, then by target.
fn canonical_order(x: &[Vec<f64>], tie: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        x[a].iter()
            .zip(&x[b])
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| tie[a].total_cmp(&tie[b]))
    });
    order
}

fn validate_fit(x: &[Vec<f64>], n_targets: usize, cfg: &ForestConfig) -> Result<usize, ModelError> {
    if x.is_empty() {
        return Err(ModelError::EmptyData);
    }
    if x.len() != n_targets {
        return Err(ModelError::DimensionMismatch {
            expected: x.len(),
            found: n_targets,
        });
    }
    let p = x[0].len();
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(ModelError::DimensionMismatch {
            expected: p.max(1),
            found: x.iter().map(Vec::len).find(|&l| l != p).unwrap_or(0),
        });
    }
    if cfg.n_estimators == 0 {
        return Err(ModelError::InvalidHyper {
            detail: "n_estimators must be >= 1".into(),
        });
    }
    if cfg.max_leaf_nodes == Some(0) {
        return Err(ModelError::InvalidHyper {
            detail: "max_leaf_nodes must be >= 1 when set".into(),
        });
    }
    Ok(p)
}

impl ForestModel {
    /// Regression forest: variance-reduction splits over `⌈p/3⌉`
    /// features per split, predictions averaged over trees.
    pub fn fit_regression(
        x: &[Vec<f64>],
        y: &[f64],
        cfg: &ForestConfig,
    ) -> Result<Self, ModelError> {
        let p = validate_fit(x, y.len(), cfg)?;
        let order = canonical_order(x, y);
        let xc: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        let yc: Vec<f64> = order.iter().map(|&i| y[i]).collect();

        let growth = GrowthConfig {
            mtry: (p as f64 / 3.0).ceil() as usize,
            max_leaf_nodes: cfg.max_leaf_nodes,
        };
        let target = RegressionTarget { y: &yc };
        let trees = (0..cfg.n_estimators)
            .map(|t| {
                let mut rng = stream_rng(cfg.seed, t as u64);
                let sample: Vec<usize> = (0..xc.len()).map(|_| rng.gen_range(0..xc.len())).collect();
                super::tree::grow_tree(&xc, &target, sample, p, &growth, &mut rng)
            })
            .collect();
        Ok(Self {
            trees: ForestTrees::Regression(trees),
            config: *cfg,
            n_features: p,
        })
    }

    /// Classification forest: Gini splits over `⌈√p⌉` features per
    /// split, probabilities averaged over per-tree leaf frequencies.
    pub fn fit_classification(
        x: &[Vec<f64>],
        labels: &[bool],
        cfg: &ForestConfig,
    ) -> Result<Self, ModelError> {
        let p = validate_fit(x, labels.len(), cfg)?;
        let tie: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
        let order = canonical_order(x, &tie);
        let xc: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        let yc: Vec<bool> = order.iter().map(|&i| labels[i]).collect();

        let growth = GrowthConfig {
            mtry: (p as f64).sqrt().ceil() as usize,
            max_leaf_nodes: cfg.max_leaf_nodes,
        };
        let target = ClassificationTarget { y: &yc };
        let trees = (0..cfg.n_estimators)
            .map(|t| {
                let mut rng = stream_rng(cfg.seed, t as u64);
                let sample: Vec<usize> = (0..xc.len()).map(|_| rng.gen_range(0..xc.len())).collect();
                super::tree::grow_tree(&xc, &target, sample, p, &growth, &mut rng)
            })
            .collect();
        Ok(Self {
            trees: ForestTrees::Classification(trees),
            config: *cfg,
            n_features: p,
        })
    }

    pub fn task(&self) -> Task {
        match self.trees {
            ForestTrees::Regression(_) => Task::Regression,
            ForestTrees::Classification(_) => Task::BinaryClassification,
        }
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Leaf counts per tree (for cap verification).
    pub fn leaf_counts(&self) -> Vec<usize> {
        match &self.trees {
            ForestTrees::Regression(trees) => trees.iter().map(Tree::n_leaves).collect(),
            ForestTrees::Classification(trees) => trees.iter().map(Tree::n_leaves).collect(),
        }
    }

    fn check_rows(&self, x: &[Vec<f64>]) -> Result<(), ModelError> {
        for row in x {
            if row.len() != self.n_features {
                return Err(ModelError::DimensionMismatch {
                    expected: self.n_features,
                    found: row.len(),
                });
            }
        }
        Ok(())
    }

    /// Mean of per-tree leaf values (regression forests only).
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        self.check_rows(x)?;
        let ForestTrees::Regression(trees) = &self.trees else {
            return Err(ModelError::WrongTask {
                expected: Task::Regression,
                found: Task::BinaryClassification,
            });
        };
        Ok(x.iter()
            .map(|row| {
                trees.iter().map(|t| *t.leaf_for(row)).sum::<f64>() / trees.len() as f64
            })
            .collect())
    }

    /// Mean of per-tree leaf class frequencies (classification only).
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<[f64; 2]>, ModelError> {
        self.check_rows(x)?;
        let ForestTrees::Classification(trees) = &self.trees else {
            return Err(ModelError::WrongTask {
                expected: Task::BinaryClassification,
                found: Task::Regression,
            });
        };
        let n = trees.len() as f64;
        Ok(x.iter()
            .map(|row| {
                let mut acc = [0.0, 0.0];
                for tree in trees {
                    let leaf = tree.leaf_for(row);
                    acc[0] += leaf[0];
                    acc[1] += leaf[1];
                }
                [acc[0] / n, acc[1] / n]
            })
            .collect())
    }

    /// Argmax labels; an exact tie goes to class 0 (`false`).
    pub fn predict_labels(&self, x: &[Vec<f64>]) -> Result<Vec<bool>, ModelError> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| p[1] > p[0])
            .collect())
    }
}
