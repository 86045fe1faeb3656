//! Second-order gradient-boosted trees: stagewise regression trees fit
//! to gradient/hessian statistics of squared-error or logistic loss,
//! with XGBoost-style gain and L2-penalized leaf weights.
//!
//! Fitting is exact greedy over all features, so it consumes no
//! randomness; the seed field exists for interface uniformity.

use serde::{Deserialize, Serialize};

use super::tree::{Node, Tree};
use super::{ModelError, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_rounds: usize,
    /// Shrinkage in [0, 1]; 0 reduces the model to its base score.
    pub learning_rate: f64,
    pub max_depth: usize,
    pub l2_leaf_penalty: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            l2_leaf_penalty: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    trees: Vec<Tree<f64>>,
    config: GbtConfig,
    base_score: f64,
    task: Task,
    n_features: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Gain contribution of a row set: G²/(H+λ).
fn leaf_gain(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    lambda: f64,
    max_depth: usize,
    nodes: Vec<Node<f64>>,
}

impl TreeBuilder<'_> {
    fn sums(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]))
    }

    /// Best split of `rows` by gain; features ascending, thresholds
    /// ascending, strict improvement — ties go low.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let (g_total, h_total) = self.sums(rows);
        let parent = leaf_gain(g_total, h_total, self.lambda);
        let p = self.x[0].len();
        let mut best: Option<(usize, f64, f64)> = None;

        for feature in 0..p {
            let mut order: Vec<usize> = rows.to_vec();
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let mut g_left = 0.0;
            let mut h_left = 0.0;
            for k in 1..order.len() {
                let prev = order[k - 1];
                g_left += self.grad[prev];
                h_left += self.hess[prev];
                let (lo, hi) = (self.x[prev][feature], self.x[order[k]][feature]);
                if lo == hi {
                    continue;
                }
                let gain = 0.5
                    * (leaf_gain(g_left, h_left, self.lambda)
                        + leaf_gain(g_total - g_left, h_total - h_left, self.lambda)
                        - parent);
                if gain > 1e-12 && best.map_or(true, |(_, _, g)| gain > g) {
                    best = Some((feature, 0.5 * (lo + hi), gain));
                }
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        if depth < self.max_depth && rows.len() >= 2 {
            if let Some((feature, threshold, _)) = self.best_split(&rows) {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&i| self.x[i][feature] <= threshold);
                let id = self.nodes.len();
                // Reserve the split slot before recursing so child ids land
                // after their parent.
                self.nodes.push(Node::Leaf(0.0));
                let left = self.build(left_rows, depth + 1);
                let right = self.build(right_rows, depth + 1);
                self.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                return id;
            }
        }
        let (g, h) = self.sums(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(-g / (h + self.lambda)));
        id
    }
}

fn validate(x: &[Vec<f64>], n_targets: usize, cfg: &GbtConfig) -> Result<usize, ModelError> {
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
    if cfg.n_rounds == 0 || cfg.max_depth == 0 {
        return Err(ModelError::InvalidHyper {
            detail: "n_rounds and max_depth must be >= 1".into(),
        });
    }
    if !(0.0..=1.0).contains(&cfg.learning_rate) {
        return Err(ModelError::InvalidHyper {
            detail: format!("learning_rate {} outside [0, 1]", cfg.learning_rate),
        });
    }
    if cfg.l2_leaf_penalty < 0.0 {
        return Err(ModelError::InvalidHyper {
            detail: "l2_leaf_penalty must be >= 0".into(),
        });
    }
    Ok(p)
}

impl GbtModel {
    /// Boosted squared-error regression; the base score is the target
    /// mean.
    pub fn fit_regression(x: &[Vec<f64>], y: &[f64], cfg: &GbtConfig) -> Result<Self, ModelError> {
        let p = validate(x, y.len(), cfg)?;
        let n = x.len();
        let base_score = y.iter().sum::<f64>() / n as f64;
        let mut scores = vec![base_score; n];
        let hess = vec![1.0; n];
        let mut trees = Vec::with_capacity(cfg.n_rounds);
        for _ in 0..cfg.n_rounds {
            let grad: Vec<f64> = scores.iter().zip(y).map(|(s, t)| s - t).collect();
            let mut builder = TreeBuilder {
                x,
                grad: &grad,
                hess: &hess,
                lambda: cfg.l2_leaf_penalty,
                max_depth: cfg.max_depth,
                nodes: Vec::new(),
            };
            builder.build((0..n).collect(), 0);
            let tree = Tree { nodes: builder.nodes };
            for (i, row) in x.iter().enumerate() {
                scores[i] += cfg.learning_rate * tree.leaf_for(row);
            }
            trees.push(tree);
        }
        Ok(Self {
            trees,
            config: *cfg,
            base_score,
            task: Task::Regression,
            n_features: p,
        })
    }

    /// Boosted logistic classification; the base score is the empirical
    /// log-odds of the positive class.
    pub fn fit_classification(
        x: &[Vec<f64>],
        labels: &[bool],
        cfg: &GbtConfig,
    ) -> Result<Self, ModelError> {
        let p = validate(x, labels.len(), cfg)?;
        let n = x.len();
        let pos = labels.iter().filter(|&&l| l).count() as f64;
        let prior = (pos / n as f64).clamp(1e-6, 1.0 - 1e-6);
        let base_score = (prior / (1.0 - prior)).ln();
        let mut scores = vec![base_score; n];
        let mut trees = Vec::with_capacity(cfg.n_rounds);
        for _ in 0..cfg.n_rounds {
            let probs: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
            let grad: Vec<f64> = probs
                .iter()
                .zip(labels)
                .map(|(&pr, &l)| pr - f64::from(u8::from(l)))
                .collect();
            let hess: Vec<f64> = probs.iter().map(|&pr| (pr * (1.0 - pr)).max(1e-16)).collect();
            let mut builder = TreeBuilder {
                x,
                grad: &grad,
                hess: &hess,
                lambda: cfg.l2_leaf_penalty,
                max_depth: cfg.max_depth,
                nodes: Vec::new(),
            };
            builder.build((0..n).collect(), 0);
            let tree = Tree { nodes: builder.nodes };
            for (i, row) in x.iter().enumerate() {
                scores[i] += cfg.learning_rate * tree.leaf_for(row);
            }
            trees.push(tree);
        }
        Ok(Self {
            trees,
            config: *cfg,
            base_score,
            task: Task::BinaryClassification,
            n_features: p,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn config(&self) -> &GbtConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn raw_score(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.config.learning_rate
                * self.trees.iter().map(|t| t.leaf_for(row)).sum::<f64>()
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

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        self.check_rows(x)?;
        if self.task != Task::Regression {
            return Err(ModelError::WrongTask {
                expected: Task::Regression,
                found: self.task,
            });
        }
        Ok(x.iter().map(|row| self.raw_score(row)).collect())
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<[f64; 2]>, ModelError> {
        self.check_rows(x)?;
        if self.task != Task::BinaryClassification {
            return Err(ModelError::WrongTask {
                expected: Task::BinaryClassification,
                found: self.task,
            });
        }
        Ok(x.iter()
            .map(|row| {
                let p1 = sigmoid(self.raw_score(row));
                [1.0 - p1, p1]
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn constant_target_predicted_exactly_in_one_round() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![42.0; 10];
        let cfg = GbtConfig {
            n_rounds: 1,
            ..GbtConfig::default()
        };
        let model = GbtModel::fit_regression(&x, &y, &cfg).unwrap();
        for p in model.predict(&x).unwrap() {
            assert_eq!(p, 42.0, "gradients vanish at the base score");
        }
    }

    #[test]
    fn planted_signal_regression_close() {
        let mut rng = stream_rng(12, 0);
        let x: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(0.0..100.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let model = GbtModel::fit_regression(&x, &y, &GbtConfig::default()).unwrap();
        let pred = model.predict(&x).unwrap();
        let rmse = (pred
            .iter()
            .zip(&y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / y.len() as f64)
            .sqrt();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(rmse / mean < 0.1, "nrmse {}", rmse / mean);
    }

    #[test]
    fn probabilities_bounded_and_blobs_separable() {
        let mut rng = stream_rng(4, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let hyper = i % 2 == 0;
            let c = if hyper { 1.5 } else { -1.5 };
            x.push(vec![c + rng.gen_range(-1.0..1.0), c + rng.gen_range(-1.0..1.0)]);
            y.push(hyper);
        }
        let model = GbtModel::fit_classification(&x, &y, &GbtConfig::default()).unwrap();
        for p in model.predict_proba(&x).unwrap() {
            assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
        assert_eq!(model.predict_labels(&x).unwrap(), y);
    }

    #[test]
    fn zero_learning_rate_predicts_base_score() {
        let mut rng = stream_rng(6, 0);
        let x: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.gen_range(-3.0..3.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| 5.0 * r[0] + 1.0).collect();
        let cfg = GbtConfig {
            learning_rate: 0.0,
            ..GbtConfig::default()
        };
        let model = GbtModel::fit_regression(&x, &y, &cfg).unwrap();
        let base = y.iter().sum::<f64>() / y.len() as f64;
        for p in model.predict(&x).unwrap() {
            assert_eq!(p, base);
        }
    }

    #[test]
    fn depth_and_round_validation() {
        let x = vec![vec![1.0], vec![2.0]];
        let y = vec![1.0, 2.0];
        for bad in [
            GbtConfig { n_rounds: 0, ..GbtConfig::default() },
            GbtConfig { max_depth: 0, ..GbtConfig::default() },
            GbtConfig { learning_rate: 1.5, ..GbtConfig::default() },
            GbtConfig { l2_leaf_penalty: -1.0, ..GbtConfig::default() },
        ] {
            assert!(matches!(
                GbtModel::fit_regression(&x, &y, &bad),
                Err(ModelError::InvalidHyper { .. })
            ));
        }
        assert!(matches!(
            GbtModel::fit_regression(&[], &[], &GbtConfig::default()),
            Err(ModelError::EmptyData)
        ));
    }

    #[test]
    fn deterministic_fit() {
        let mut rng = stream_rng(8, 0);
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 2.0 - r[1]).collect();
        let a = GbtModel::fit_regression(&x, &y, &GbtConfig::default()).unwrap();
        let b = GbtModel::fit_regression(&x, &y, &GbtConfig::default()).unwrap();
        assert_eq!(a, b);
        let pa = a.predict(&x).unwrap();
        let pb = b.predict(&x).unwrap();
        for (u, v) in pa.iter().zip(&pb) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn wrong_task_rejected() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![1.0, 2.0, 3.0];
        let model = GbtModel::fit_regression(&x, &y, &GbtConfig::default()).unwrap();
        assert!(matches!(
            model.predict_proba(&x),
            Err(ModelError::WrongTask { .. })
        ));
    }
}
