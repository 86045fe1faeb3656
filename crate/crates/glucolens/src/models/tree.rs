//! Shared CART machinery: axis-aligned split search and best-first tree
//! growth with an optional leaf cap, used by the forest and boosting
//! models.
//!
//! Determinism rules: candidate features are searched in ascending index
//! order and thresholds in ascending order, and a split must be strictly
//! better to displace the incumbent — so ties resolve to the lowest
//! feature index, then the lowest threshold.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A node in an arena-allocated binary decision tree. Rows with
/// `row[feature] <= threshold` descend left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<L> {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(L),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    pub nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    pub fn leaf_for(&self, row: &[f64]) -> &L {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(leaf) => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf(_)))
            .count()
    }
}

/// How a target type scores and summarizes row subsets during growth.
pub trait SplitTarget {
    type Leaf: Clone;

    /// The leaf payload for a set of rows.
    fn leaf(&self, rows: &[usize]) -> Self::Leaf;

    /// Total (not mean) impurity of a set of rows: sum of squared error
    /// for regression, weighted Gini for classification.
    fn impurity(&self, rows: &[usize]) -> f64;

    /// Best threshold on one feature: `(threshold, combined child
    /// impurity)`, or None when the feature is constant over the rows.
    /// Scanned in ascending threshold order, first-best kept.
    fn best_threshold(&self, x: &[Vec<f64>], rows: &[usize], feature: usize) -> Option<(f64, f64)>;
}

/// Sort rows by a feature and return the candidate split positions:
/// boundaries between distinct consecutive values.
fn sorted_by_feature(x: &[Vec<f64>], rows: &[usize], feature: usize) -> Vec<usize> {
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
    order
}

pub struct RegressionTarget<'a> {
    pub y: &'a [f64],
}

impl SplitTarget for RegressionTarget<'_> {
    type Leaf = f64;

    fn leaf(&self, rows: &[usize]) -> f64 {
        rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64
    }

    fn impurity(&self, rows: &[usize]) -> f64 {
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let sq: f64 = rows.iter().map(|&i| self.y[i] * self.y[i]).sum();
        (sq - sum * sum / n).max(0.0)
    }

    fn best_threshold(&self, x: &[Vec<f64>], rows: &[usize], feature: usize) -> Option<(f64, f64)> {
        let order = sorted_by_feature(x, rows, feature);
        let n = order.len();
        let total_sum: f64 = order.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = order.iter().map(|&i| self.y[i] * self.y[i]).sum();

        let mut best: Option<(f64, f64)> = None;
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for k in 1..n {
            let prev = order[k - 1];
            left_sum += self.y[prev];
            left_sq += self.y[prev] * self.y[prev];
            let (lo, hi) = (x[prev][feature], x[order[k]][feature]);
            if lo == hi {
                continue;
            }
            let nl = k as f64;
            let nr = (n - k) as f64;
            let sse_left = (left_sq - left_sum * left_sum / nl).max(0.0);
            let right_sum = total_sum - left_sum;
            let sse_right = ((total_sq - left_sq) - right_sum * right_sum / nr).max(0.0);
            let score = sse_left + sse_right;
            if best.map_or(true, |(_, s)| score < s) {
                best = Some((0.5 * (lo + hi), score));
            }
        }
        best
    }
}

pub struct ClassificationTarget<'a> {
    pub y: &'a [bool],
}

/// Weighted Gini impurity of a (false, true) count pair.
fn weighted_gini(n_false: f64, n_true: f64) -> f64 {
    let n = n_false + n_true;
    if n == 0.0 {
        0.0
    } else {
        n - (n_false * n_false + n_true * n_true) / n
    }
}

impl SplitTarget for ClassificationTarget<'_> {
    /// Class frequencies `(P(false), P(true))` at the leaf.
    type Leaf = [f64; 2];

    fn leaf(&self, rows: &[usize]) -> [f64; 2] {
        let n_true = rows.iter().filter(|&&i| self.y[i]).count() as f64;
        let n = rows.len() as f64;
        [(n - n_true) / n, n_true / n]
    }

    fn impurity(&self, rows: &[usize]) -> f64 {
        let n_true = rows.iter().filter(|&&i| self.y[i]).count() as f64;
        weighted_gini(rows.len() as f64 - n_true, n_true)
    }

    fn best_threshold(&self, x: &[Vec<f64>], rows: &[usize], feature: usize) -> Option<(f64, f64)> {
        let order = sorted_by_feature(x, rows, feature);
        let n = order.len();
        let total_true = order.iter().filter(|&&i| self.y[i]).count() as f64;

        let mut best: Option<(f64, f64)> = None;
        let mut left_true = 0.0;
        for k in 1..n {
            let prev = order[k - 1];
            if self.y[prev] {
                left_true += 1.0;
            }
            let (lo, hi) = (x[prev][feature], x[order[k]][feature]);
            if lo == hi {
                continue;
            }
            let left_n = k as f64;
            let right_n = (n - k) as f64;
            let score = weighted_gini(left_n - left_true, left_true)
                + weighted_gini(right_n - (total_true - left_true), total_true - left_true);
            if best.map_or(true, |(_, s)| score < s) {
                best = Some((0.5 * (lo + hi), score));
            }
        }
        best
    }
}

pub struct GrowthConfig {
    /// Features considered per split (sampled without replacement).
    pub mtry: usize,
    /// Cap on total leaves; `None` grows until pure.
    pub max_leaf_nodes: Option<usize>,
}

/// A frontier entry: the best split found for a not-yet-expanded node.
struct Candidate {
    gain: f64,
    node_id: usize,
    feature: usize,
    threshold: f64,
    rows: Vec<usize>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.gain == other.gain && self.node_id == other.node_id
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    /// Max-heap on gain; earlier-created nodes win ties.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then(other.node_id.cmp(&self.node_id))
    }
}

/// Best split over a sampled feature subset, as a heap candidate.
fn best_split<T: SplitTarget>(
    x: &[Vec<f64>],
    target: &T,
    node_id: usize,
    rows: Vec<usize>,
    n_features: usize,
    cfg: &GrowthConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    if rows.len() < 2 {
        return None;
    }
    let parent = target.impurity(&rows);
    if parent_impurity_negligible(parent) {
        return None;
    }

    let mut features: Vec<usize> = (0..n_features).collect();
    let chosen: Vec<usize> = if cfg.mtry >= n_features {
        features
    } else {
        features.shuffle(rng);
        let mut subset = features[..cfg.mtry].to_vec();
        subset.sort_unstable();
        subset
    };

    let mut best: Option<(usize, f64, f64)> = None;
    for feature in chosen {
        if let Some((threshold, score)) = target.best_threshold(x, &rows, feature) {
            if best.map_or(true, |(_, _, s)| score < s) {
                best = Some((feature, threshold, score));
            }
        }
    }
    best.and_then(|(feature, threshold, score)| {
        let gain = parent - score;
        (gain > 1e-12).then_some(Candidate {
            gain,
            node_id,
            feature,
            threshold,
            rows,
        })
    })
}

fn parent_impurity_negligible(impurity: f64) -> bool {
    impurity <= 1e-12
}

/// Grow a tree best-first: repeatedly expand the frontier node whose
/// split removes the most impurity, until the leaf cap is reached or no
/// improving split remains.
pub fn grow_tree<T: SplitTarget>(
    x: &[Vec<f64>],
    target: &T,
    rows: Vec<usize>,
    n_features: usize,
    cfg: &GrowthConfig,
    rng: &mut ChaCha8Rng,
) -> Tree<T::Leaf> {
    let cap = cfg.max_leaf_nodes.unwrap_or(usize::MAX).max(1);
    let mut nodes = vec![Node::Leaf(target.leaf(&rows))];
    let mut leaves = 1;

    let mut heap = BinaryHeap::new();
    if let Some(c) = best_split(x, target, 0, rows, n_features, cfg, rng) {
        heap.push(c);
    }

    while leaves < cap {
        let Some(cand) = heap.pop() else { break };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = cand
            .rows
            .iter()
            .partition(|&&i| x[i][cand.feature] <= cand.threshold);

        let left_id = nodes.len();
        nodes.push(Node::Leaf(target.leaf(&left_rows)));
        let right_id = nodes.len();
        nodes.push(Node::Leaf(target.leaf(&right_rows)));
        nodes[cand.node_id] = Node::Split {
            feature: cand.feature,
            threshold: cand.threshold,
            left: left_id,
            right: right_id,
        };
        leaves += 1;

        if let Some(c) = best_split(x, target, left_id, left_rows, n_features, cfg, rng) {
            heap.push(c);
        }
        if let Some(c) = best_split(x, target, right_id, right_rows, n_features, cfg, rng) {
            heap.push(c);
        }
    }
    Tree { nodes }
}
