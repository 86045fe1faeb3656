//! Diverse counterfactual explanations for the hyperglycemia classifier.
//!
//! Given a classified instance, the generator searches for k nearby feature
//! vectors the model assigns the opposite label, keeping protected features
//! fixed and every value inside its training range. The classifier is a
//! tree ensemble, so the search is model-agnostic: a population of
//! candidate k-sets evolves by mutation, crossover, and random restarts
//! under a joint loss that rewards validity, proximity, and diversity.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{AnyModel, ModelError, Task};
use crate::rng::stream_rng;

/// Features a counterfactual may never change, by default.
pub const DEFAULT_IMMUTABLE: [&str; 2] = ["bmi", "day_of_week"];

/// Features that live on an integer lattice, by default.
pub const DEFAULT_INTEGER: [&str; 2] = ["day_of_week", "work_from_home"];

/// Floor applied to per-feature MAD so proximity never divides by zero.
pub const MAD_FLOOR: f64 = 1e-6;

/// Default search budget, in model evaluations.
pub const DEFAULT_BUDGET: usize = 20_000;

/// Margin the hinge term pushes the target-class probability past.
const VALIDITY_MARGIN: f64 = 0.05;

#[derive(Debug, Error)]
pub enum CfError {
    #[error("no feature named {name}")]
    UnknownFeature { name: String },
    #[error("training column {name} contains a non-finite value")]
    NonFiniteTraining { name: String },
    #[error("need at least one training row")]
    EmptyTraining,
    #[error("instance has {found} values, constraints describe {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("k must be at least 1")]
    ZeroCandidates,
    #[error("budget {budget} cannot evaluate even one candidate set of {k}")]
    BudgetTooSmall { budget: usize, k: usize },
    #[error("model is not a classifier")]
    NotAClassifier,
    #[error("no valid counterfactual found within the budget")]
    NoCounterfactualFound,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What a counterfactual is allowed to do, derived from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfConstraints {
    feature_names: Vec<String>,
    immutable: BTreeSet<usize>,
    integer: BTreeSet<usize>,
    /// Per-feature training [min, max].
    ranges: Vec<(f64, f64)>,
    /// Per-feature median absolute deviation, floored.
    mads: Vec<f64>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

impl CfConstraints {
    /// Derive ranges and MAD scales from training rows; protected and
    /// integer features start from the defaults, intersected with the
    /// features actually present.
    pub fn from_training(names: &[String], rows: &[Vec<f64>]) -> Result<Self, CfError> {
        if rows.is_empty() {
            return Err(CfError::EmptyTraining);
        }
        let p = names.len();
        for row in rows {
            if row.len() != p {
                return Err(CfError::ShapeMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
        }
        let mut ranges = Vec::with_capacity(p);
        let mut mads = Vec::with_capacity(p);
        for j in 0..p {
            let mut column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            if column.iter().any(|v| !v.is_finite()) {
                return Err(CfError::NonFiniteTraining {
                    name: names[j].clone(),
                });
            }
            column.sort_by(f64::total_cmp);
            ranges.push((column[0], column[column.len() - 1]));
            let med = median(&column);
            let mut deviations: Vec<f64> = column.iter().map(|v| (v - med).abs()).collect();
            deviations.sort_by(f64::total_cmp);
            mads.push(median(&deviations).max(MAD_FLOOR));
        }
        let index_of = |name: &str| names.iter().position(|n| n == name);
        Ok(Self {
            feature_names: names.to_vec(),
            immutable: DEFAULT_IMMUTABLE.iter().filter_map(|n| index_of(n)).collect(),
            integer: DEFAULT_INTEGER.iter().filter_map(|n| index_of(n)).collect(),
            ranges,
            mads,
        })
    }

    /// Replace the protected-feature set.
    pub fn with_immutable<'a>(
        mut self,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, CfError> {
        self.immutable = self.resolve(names)?;
        Ok(self)
    }

    /// Replace the integer-lattice feature set.
    pub fn with_integer<'a>(
        mut self,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, CfError> {
        self.integer = self.resolve(names)?;
        Ok(self)
    }

    fn resolve<'a>(
        &self,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Result<BTreeSet<usize>, CfError> {
        names
            .into_iter()
            .map(|name| {
                self.feature_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| CfError::UnknownFeature {
                        name: name.to_string(),
                    })
            })
            .collect()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn mads(&self) -> &[f64] {
        &self.mads
    }

    pub fn is_immutable(&self, index: usize) -> bool {
        self.immutable.contains(&index)
    }

    fn mutable_indices(&self) -> Vec<usize> {
        (0..self.feature_names.len())
            .filter(|i| !self.immutable.contains(i))
            .collect()
    }

    /// MAD-scaled L1 distance over mutable features.
    pub fn proximity(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mutable_indices()
            .iter()
            .map(|&j| (a[j] - b[j]).abs() / self.mads[j])
            .sum()
    }

    fn clamp(&self, j: usize, value: f64) -> f64 {
        let (lo, hi) = self.ranges[j];
        let v = value.clamp(lo, hi);
        if self.integer.contains(&j) {
            v.round().clamp(lo, hi)
        } else {
            v
        }
    }
}

/// Search knobs; the loss weights match the generator's defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfRequest {
    /// Label the counterfactuals must receive.
    pub target_label: bool,
    /// How many diverse counterfactuals to look for.
    pub k: usize,
    /// Model-evaluation budget.
    pub budget: usize,
    pub seed: u64,
    pub proximity_weight: f64,
    pub diversity_weight: f64,
}

impl CfRequest {
    pub fn new(target_label: bool, k: usize) -> Self {
        Self {
            target_label,
            k,
            budget: DEFAULT_BUDGET,
            seed: 0,
            proximity_weight: 0.5,
            diversity_weight: 1.0,
        }
    }
}

/// One found counterfactual: feature values plus the label they earn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub values: Vec<f64>,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfStatus {
    /// All k requested counterfactuals were found.
    Complete,
    /// The budget ran out first; fewer than k are returned.
    Partial,
}

/// The outcome of one generation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSet {
    pub feature_names: Vec<String>,
    pub original: Vec<f64>,
    pub original_label: bool,
    pub target_label: bool,
    pub counterfactuals: Vec<Counterfactual>,
    pub status: CfStatus,
    /// Best joint loss reached; non-increasing in the budget for a fixed
    /// seed.
    pub best_loss: f64,
    pub evaluations_used: usize,
}

/// One changed feature in a counterfactual, in canonical feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChange {
    pub name: String,
    pub original: f64,
    pub counterfactual: f64,
}

impl CounterfactualSet {
    /// Per-counterfactual changed features, canonical order, exact
    /// comparison — untouched features are copies of the original.
    pub fn diffs(&self) -> Vec<Vec<FeatureChange>> {
        self.counterfactuals
            .iter()
            .map(|cf| {
                self.feature_names
                    .iter()
                    .zip(self.original.iter().zip(&cf.values))
                    .filter(|(_, (orig, new))| orig != new)
                    .map(|(name, (orig, new))| FeatureChange {
                        name: name.clone(),
                        original: *orig,
                        counterfactual: *new,
                    })
                    .collect()
            })
            .collect()
    }
}

/// Human-readable diff: one block per option, only changed features.
pub fn diff_report(set: &CounterfactualSet) -> String {
    let mut out = String::new();
    for (i, changes) in set.diffs().iter().enumerate() {
        out.push_str(&format!("Option {}:\n", i + 1));
        for change in changes {
            out.push_str(&format!(
                "  {}: {:.2} -> {:.2}\n",
                change.name, change.original, change.counterfactual
            ));
        }
    }
    out
}

/// A candidate set mid-search, with its member evaluations.
struct Evaluated {
    members: Vec<Vec<f64>>,
    loss: f64,
}

struct Search<'a> {
    model: &'a AnyModel,
    constraints: &'a CfConstraints,
    request: &'a CfRequest,
    original: &'a [f64],
    mutable: Vec<usize>,
    evaluations: usize,
    /// Every valid candidate seen, keyed by bit pattern for exact dedup;
    /// the value is its proximity to the original.
    archive: BTreeMap<Vec<u64>, f64>,
}

fn bits(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

impl<'a> Search<'a> {
    fn margin(&self, proba: [f64; 2]) -> f64 {
        if self.request.target_label {
            proba[1] - proba[0]
        } else {
            proba[0] - proba[1]
        }
    }

    /// Score one candidate set (k model evaluations) and archive its valid
    /// members.
    fn evaluate(&mut self, members: Vec<Vec<f64>>) -> Result<Evaluated, CfError> {
        let probas = self.model.predict_proba(&members)?;
        self.evaluations += members.len();
        let k = members.len() as f64;
        let mut hinge_sum = 0.0;
        let mut proximity_sum = 0.0;
        for (member, proba) in members.iter().zip(&probas) {
            let margin = self.margin(*proba);
            hinge_sum += (VALIDITY_MARGIN - margin).max(0.0);
            let proximity = self.constraints.proximity(member, self.original);
            proximity_sum += proximity;
            if margin > 0.0 && member[..] != *self.original {
                self.archive.insert(bits(member), proximity);
            }
        }
        let mut diversity = 0.0;
        if members.len() >= 2 {
            let mut pairs = 0usize;
            for i in 0..members.len() {
                for j in i + 1..members.len() {
                    diversity += self.constraints.proximity(&members[i], &members[j]);
                    pairs += 1;
                }
            }
            diversity /= pairs as f64;
        }
        let loss = hinge_sum / k + self.request.proximity_weight * proximity_sum / k
            - self.request.diversity_weight * diversity;
        Ok(Evaluated { members, loss })
    }

    /// The original with each mutable feature resampled with probability
    /// one half — a random restart anchored to the instance.
    fn random_candidate(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut values = self.original.to_vec();
        for &j in &self.mutable {
            if rng.gen::<f64>() < 0.5 {
                let (lo, hi) = self.constraints.ranges()[j];
                let v = if lo < hi { rng.gen_range(lo..=hi) } else { lo };
                values[j] = self.constraints.clamp(j, v);
            }
        }
        values
    }

    fn random_set(&self, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..self.request.k)
            .map(|_| self.random_candidate(rng))
            .collect()
    }

    fn mutate(&self, member: &mut [f64], rng: &mut impl Rng) {
        for &j in &self.mutable {
            if rng.gen::<f64>() >= 0.3 {
                continue;
            }
            let (lo, hi) = self.constraints.ranges()[j];
            let v = if rng.gen::<f64>() < 0.3 {
                // Occasional long jump keeps the search global.
                if lo < hi {
                    rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            } else {
                // Local step scaled by the feature's own spread; integer
                // features step whole lattice points.
                let scale = self.constraints.mads()[j].max(1.0 * f64::from(u8::from(
                    self.constraints.integer.contains(&j),
                )));
                member[j] + Normal::new(0.0, scale).expect("positive sd").sample(rng)
            };
            member[j] = self.constraints.clamp(j, v);
        }
    }
}

/// Search for up to `request.k` diverse counterfactuals of `instance`.
///
/// Deterministic for a fixed seed; the candidate stream depends only on
/// the seed, so growing the budget extends the same search and the best
/// loss can only improve.
pub fn generate(
    model: &AnyModel,
    instance: &[f64],
    constraints: &CfConstraints,
    request: &CfRequest,
) -> Result<CounterfactualSet, CfError> {
    if model.task() != Task::BinaryClassification {
        return Err(CfError::NotAClassifier);
    }
    if request.k == 0 {
        return Err(CfError::ZeroCandidates);
    }
    let p = constraints.feature_names().len();
    if instance.len() != p {
        return Err(CfError::ShapeMismatch {
            expected: p,
            found: instance.len(),
        });
    }
    // One evaluation for the original's own label, then whole sets only.
    if request.budget < 1 + request.k {
        return Err(CfError::BudgetTooSmall {
            budget: request.budget,
            k: request.k,
        });
    }

    let mut search = Search {
        model,
        constraints,
        request,
        original: instance,
        mutable: constraints.mutable_indices(),
        evaluations: 0,
        archive: BTreeMap::new(),
    };
    let original_proba = model.predict_proba(&[instance.to_vec()])?[0];
    search.evaluations += 1;
    let original_label = original_proba[1] > original_proba[0];

    let mut rng = stream_rng(request.seed, 0);
    const POPULATION: usize = 8;
    let mut population: Vec<Evaluated> = Vec::with_capacity(POPULATION);
    let mut best_loss = f64::INFINITY;
    let mut best_members: Vec<Vec<f64>> = Vec::new();

    let fits = |search: &Search| search.evaluations + request.k <= request.budget;
    while population.len() < POPULATION && fits(&search) {
        let set = search.random_set(&mut rng);
        let evaluated = search.evaluate(set)?;
        if evaluated.loss < best_loss {
            best_loss = evaluated.loss;
            best_members = evaluated.members.clone();
        }
        population.push(evaluated);
    }

    while fits(&search) && !population.is_empty() {
        let child = if rng.gen::<f64>() < 0.15 {
            // Random restart.
            search.random_set(&mut rng)
        } else {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
                let a = rng.gen_range(0..population.len());
                let b = rng.gen_range(0..population.len());
                if population[a].loss <= population[b].loss {
                    a
                } else {
                    b
                }
            };
            let (pa, pb) = (pick(&mut rng), pick(&mut rng));
            let mut members = Vec::with_capacity(request.k);
            for slot in 0..request.k {
                let parent = if rng.gen::<bool>() { pa } else { pb };
                let mut member = population[parent].members[slot].clone();
                search.mutate(&mut member, &mut rng);
                members.push(member);
            }
            members
        };
        let evaluated = search.evaluate(child)?;
        if evaluated.loss < best_loss {
            best_loss = evaluated.loss;
            best_members = evaluated.members.clone();
        }
        let worst = population
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.loss.total_cmp(&b.1.loss))
            .map(|(i, _)| i)
            .expect("population non-empty");
        if evaluated.loss < population[worst].loss {
            population[worst] = evaluated;
        }
    }

    // Assemble the answer: valid members of the best set first, then the
    // closest archived candidates, all distinct.
    let mut chosen: Vec<Vec<f64>> = Vec::new();
    let mut taken: BTreeSet<Vec<u64>> = BTreeSet::new();
    for member in &best_members {
        let key = bits(member);
        if search.archive.contains_key(&key) && taken.insert(key) {
            chosen.push(member.clone());
        }
        if chosen.len() == request.k {
            break;
        }
    }
    if chosen.len() < request.k {
        let mut by_proximity: Vec<(&Vec<u64>, &f64)> = search.archive.iter().collect();
        by_proximity.sort_by(|a, b| a.1.total_cmp(b.1).then_with(|| a.0.cmp(b.0)));
        for (key, _) in by_proximity {
            if chosen.len() == request.k {
                break;
            }
            if taken.insert(key.clone()) {
                chosen.push(key.iter().map(|&b| f64::from_bits(b)).collect());
            }
        }
    }
    if chosen.is_empty() {
        return Err(CfError::NoCounterfactualFound);
    }
    let status = if chosen.len() == request.k {
        CfStatus::Complete
    } else {
        CfStatus::Partial
    };
    Ok(CounterfactualSet {
        feature_names: constraints.feature_names().to_vec(),
        original: instance.to_vec(),
        original_label,
        target_label: request.target_label,
        counterfactuals: chosen
            .into_iter()
            .map(|values| Counterfactual {
                values,
                label: request.target_label,
            })
            .collect(),
        status,
        best_loss,
        evaluations_used: search.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ForestConfig, ForestModel, GbtConfig, GbtModel};
    use crate::rng::stream_rng;

    /// Small planted-rule world: the label is positive (hyperglycemic)
    /// exactly when fiber is low and stepping is low; everything else is
    /// noise the forest should ignore.
    fn planted_world() -> (AnyModel, Vec<String>, Vec<Vec<f64>>, Vec<f64>) {
        let names: Vec<String> = ["bmi", "day_of_week", "fiber", "work_step", "sugar"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rng = stream_rng(404, 0);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..400 {
            let bmi = rng.gen_range(20.0..40.0);
            let dow = rng.gen_range(0..7) as f64;
            let fiber = rng.gen_range(0.0..10.0);
            let step = rng.gen_range(0.0..60.0);
            let sugar = rng.gen_range(0.0..50.0);
            labels.push(fiber < 3.0 && step < 24.0);
            rows.push(vec![bmi, dow, fiber, step, sugar]);
        }
        let cfg = ForestConfig {
            n_estimators: 60,
            max_leaf_nodes: None,
            seed: 5,
        };
        let bools: Vec<bool> = labels.clone();
        let model =
            AnyModel::Forest(ForestModel::fit_classification(&rows, &bools, &cfg).unwrap());
        // A known hyperglycemic instance: fiber 1 g, stepping ~9 min.
        let instance = vec![31.0, 2.0, 1.0, 8.95, 30.0];
        (model, names, rows, instance)
    }

    fn planted_request(k: usize) -> CfRequest {
        CfRequest {
            budget: 4_000,
            seed: 9,
            ..CfRequest::new(false, k)
        }
    }

    #[test]
    fn planted_rule_counterfactuals_raise_fiber_or_stepping() {
        let (model, names, rows, instance) = planted_world();
        let constraints = CfConstraints::from_training(&names, &rows).unwrap();
        let set = generate(&model, &instance, &constraints, &planted_request(3)).unwrap();
        assert!(set.original_label, "instance should classify hyperglycemic");
        assert_eq!(set.status, CfStatus::Complete);
        assert_eq!(set.counterfactuals.len(), 3);
        for cf in &set.counterfactuals {
            // Valid under the live model, not just claimed.
            let proba = model.predict_proba(&[cf.values.clone()]).unwrap()[0];
            assert!(proba[0] > proba[1], "counterfactual must flip the label");
            // The planted rule only breaks by raising fiber or stepping.
            assert!(
                cf.values[2] > 2.0 || cf.values[3] > 20.0,
                "expected more fiber or stepping, got {:?}",
                cf.values
            );
        }
    }

    #[test]
    fn immutables_and_ranges_hold_for_every_counterfactual() {
        let (model, names, rows, instance) = planted_world();
        let constraints = CfConstraints::from_training(&names, &rows).unwrap();
        let set = generate(&model, &instance, &constraints, &planted_request(3)).unwrap();
        for cf in &set.counterfactuals {
            assert_eq!(cf.values[0], instance[0], "bmi is protected");
            assert_eq!(cf.values[1], instance[1], "day of week is protected");
            for (j, &v) in cf.values.iter().enumerate() {
                let (lo, hi) = constraints.ranges()[j];
                assert!(v >= lo && v <= hi, "feature {j} out of range");
            }
            assert_eq!(cf.values[1], cf.values[1].round(), "day of week is a lattice value");
        }
        // Diversity: returned counterfactuals are pairwise distinct.
        for i in 0..set.counterfactuals.len() {
            for j in i + 1..set.counterfactuals.len() {
                let d = constraints.proximity(
                    &set.counterfactuals[i].values,
                    &set.counterfactuals[j].values,
                );
                assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn constant_classifier_finds_nothing() {
        let (_, names, rows, instance) = planted_world();
        // Zero learning rate: the model always answers the class prior.
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64; 5]).collect();
        let y: Vec<bool> = (0..10).map(|i| i < 8).collect();
        let cfg = GbtConfig {
            learning_rate: 0.0,
            n_rounds: 1,
            ..GbtConfig::default()
        };
        let constant = AnyModel::Gbt(GbtModel::fit_classification(&x, &y, &cfg).unwrap());
        let constraints = CfConstraints::from_training(&names, &rows).unwrap();
        let request = CfRequest {
            budget: 500,
            ..CfRequest::new(false, 2)
        };
        assert!(matches!(
            generate(&constant, &instance, &constraints, &request),
            Err(CfError::NoCounterfactualFound)
        ));
    }

    #[test]
    fn deterministic_given_seed_and_budget() {
        let (model, names, rows, instance) = planted_world();
        let constraints = CfConstraints::from_training(&names, &rows).unwrap();
        let a = generate(&model, &instance, &constraints, &planted_request(2)).unwrap();
        let b = generate(&model, &instance, &constraints, &planted_request(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn best_loss_never_worsens_with_more_budget() {
        let (model, names, rows, instance) = planted_world();
        let constraints = CfConstraints::from_training(&names, &rows).unwrap();
        let mut previous = f64::INFINITY;
        for budget in [200, 800, 3_200, 12_800] {
            let request = CfRequest {
                budget,
                seed: 40,
                ..CfRequest::new(false, 3)
            };
            let set = generate(&model, &instance, &constraints, &request).unwrap();
            assert!(
                set.best_loss <= previous,
                "budget {budget} worsened the best loss"
            );
            previous = set.best_loss;
        }
    }

    #[test]
    fn diff_report_lists_only_changes_in_canonical_order() {
        let (model, names, rows, instance) = planted_world();
        let constraints = CfConstraints::from_training(&names, &rows).unwrap();
        let set = generate(&model, &instance, &constraints, &planted_request(2)).unwrap();
        let diffs = set.diffs();
        assert_eq!(diffs.len(), set.counterfactuals.len());
        for (cf, changes) in set.counterfactuals.iter().zip(&diffs) {
            assert!(!changes.is_empty(), "a counterfactual must differ somewhere");
            // Canonical order: positions ascend in feature-name order.
            let positions: Vec<usize> = changes
                .iter()
                .map(|c| names.iter().position(|n| *n == c.name).unwrap())
                .collect();
            assert!(positions.windows(2).all(|w| w[0] < w[1]));
            for change in changes {
                let j = names.iter().position(|n| *n == change.name).unwrap();
                assert_eq!(change.original, instance[j]);
                assert_eq!(change.counterfactual, cf.values[j]);
                assert_ne!(change.original, change.counterfactual);
            }
            // Unchanged features never show up.
            let changed: BTreeSet<&str> = changes.iter().map(|c| c.name.as_str()).collect();
            for (j, name) in names.iter().enumerate() {
                if !changed.contains(name.as_str()) {
                    assert_eq!(cf.values[j], instance[j]);
                }
            }
        }
        let text = diff_report(&set);
        assert!(text.contains("Option 1:"));
        assert!(!text.contains("bmi"), "protected features never change");
    }

    #[test]
    fn tiny_budget_reports_partial() {
        let (model, names, rows, instance) = planted_world();
        let constraints = CfConstraints::from_training(&names, &rows).unwrap();
        // Enough budget for the original plus a couple of sets only; with
        // k this large the archive cannot fill the request.
        let request = CfRequest {
            budget: 13,
            seed: 2,
            ..CfRequest::new(false, 6)
        };
        match generate(&model, &instance, &constraints, &request) {
            Ok(set) => {
                assert_eq!(set.status, CfStatus::Partial);
                assert!(!set.counterfactuals.is_empty());
                assert!(set.counterfactuals.len() < 6);
            }
            Err(CfError::NoCounterfactualFound) => {
                panic!("seed 2 should find at least one valid candidate")
            }
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn validates_shapes_and_requests() {
        let (model, names, rows, instance) = planted_world();
        let constraints = CfConstraints::from_training(&names, &rows).unwrap();
        assert!(matches!(
            generate(&model, &instance[..3], &constraints, &planted_request(2)),
            Err(CfError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            generate(&model, &instance, &constraints, &planted_request(0)),
            Err(CfError::ZeroCandidates)
        ));
        let starved = CfRequest {
            budget: 3,
            ..CfRequest::new(false, 4)
        };
        assert!(matches!(
            generate(&model, &instance, &constraints, &starved),
            Err(CfError::BudgetTooSmall { .. })
        ));
        assert!(matches!(
            CfConstraints::from_training(&names, &[]),
            Err(CfError::EmptyTraining)
        ));
        assert!(matches!(
            CfConstraints::from_training(&names, &rows)
                .unwrap()
                .with_immutable(["no_such_feature"]),
            Err(CfError::UnknownFeature { .. })
        ));
    }

    #[test]
    fn reverse_direction_also_works() {
        // A normal instance pushed toward hyperglycemia: the search must
        // work in both directions.
        let (model, names, rows, _) = planted_world();
        let constraints = CfConstraints::from_training(&names, &rows).unwrap();
        let normal = vec![31.0, 2.0, 8.0, 50.0, 10.0];
        let request = CfRequest {
            budget: 4_000,
            seed: 11,
            ..CfRequest::new(true, 2)
        };
        let set = generate(&model, &normal, &constraints, &request).unwrap();
        assert!(!set.original_label);
        for cf in &set.counterfactuals {
            let proba = model.predict_proba(&[cf.values.clone()]).unwrap()[0];
            assert!(proba[1] > proba[0]);
        }
    }
}
