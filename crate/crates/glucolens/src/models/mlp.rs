//! Multilayer perceptrons in the thirteen fixed hidden-stack variations,
//! trained by mini-batch Adam with fan-in-scaled initialization.
//!
//! Hidden layers are rectified-linear; the output is identity for
//! regression (on an internally standardized target) and two-way softmax
//! for classification. Parameters live in one flat vector, layer-major
//! (weights row-major, then biases), which keeps the optimizer state and
//! the finite-difference gradient check straightforward.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ModelError, Task};
use crate::rng::stream_rng;

/// Hidden-layer widths of the thirteen MLP variations, ids 1–13.
pub const MLP_VARIATIONS: [&[usize]; 13] = [
    &[20, 10, 5],
    &[40, 20, 10, 5],
    &[60, 30, 15, 7],
    &[80, 40, 20, 10, 5],
    &[100, 50, 25, 12, 6],
    &[120, 60, 30, 15, 7],
    &[140, 70, 35, 17, 8],
    &[160, 80, 40, 20, 10],
    &[80, 40, 20, 20, 20, 20, 10, 5],
    &[100, 50, 25, 25, 25, 25, 12, 6],
    &[120, 60, 30, 30, 30, 30, 15, 7],
    &[140, 70, 35, 35, 35, 35, 17, 8],
    &[160, 80, 40, 40, 40, 40, 20, 10],
];

/// The hidden stack for a variation id (1-based).
pub fn variation_layers(variation_id: u8) -> Result<&'static [usize], ModelError> {
    (variation_id as usize)
        .checked_sub(1)
        .and_then(|i| MLP_VARIATIONS.get(i))
        .copied()
        .ok_or(ModelError::InvalidVariation { variation_id })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without loss improvement.
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: 32,
            patience: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub variation_id: u8,
    task: Task,
    /// Layer widths including input and output: `[p, hidden…, out]`.
    sizes: Vec<usize>,
    /// Flat parameters, layer-major: weights (row-major), then biases.
    params: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    /// Mean training loss per epoch, in training order.
    loss_history: Vec<f64>,
}

/// Per-layer `(weight offset, bias offset)` into the flat vector.
fn offsets(sizes: &[usize]) -> Vec<(usize, usize)> {
    let mut offs = Vec::with_capacity(sizes.len() - 1);
    let mut cursor = 0;
    for l in 0..sizes.len() - 1 {
        let span = sizes[l] * sizes[l + 1];
        offs.push((cursor, cursor + span));
        cursor += span + sizes[l + 1];
    }
    offs
}

fn count_params(sizes: &[usize]) -> usize {
    (0..sizes.len() - 1)
        .map(|l| sizes[l] * sizes[l + 1] + sizes[l + 1])
        .sum()
}

/// Activations per layer, input first, output (identity or softmax) last.
fn forward(sizes: &[usize], offs: &[(usize, usize)], params: &[f64], row: &[f64], task: Task) -> Vec<Vec<f64>> {
    let layers = sizes.len() - 1;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
    acts.push(row.to_vec());
    for l in 0..layers {
        let (w_off, b_off) = offs[l];
        let fan_in = sizes[l];
        let fan_out = sizes[l + 1];
        let prev = &acts[l];
        let mut z = vec![0.0; fan_out];
        for (o, zo) in z.iter_mut().enumerate() {
            let w = &params[w_off + o * fan_in..w_off + (o + 1) * fan_in];
            *zo = params[b_off + o] + w.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
        }
        let a = if l != layers - 1 {
            z.iter().map(|&v| v.max(0.0)).collect()
        } else {
            match task {
                Task::Regression => z,
                Task::BinaryClassification => {
                    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
                    let sum: f64 = exps.iter().sum();
                    exps.iter().map(|&e| e / sum).collect()
                }
            }
        };
        acts.push(a);
    }
    acts
}

/// Loss of one row plus its gradient contribution (scaled by `scale`)
/// accumulated into `grad`. `target` is the standardized regression value
/// or the class index as 0.0/1.0.
fn backward(
    sizes: &[usize],
    offs: &[(usize, usize)],
    params: &[f64],
    row: &[f64],
    target: f64,
    task: Task,
    scale: f64,
    grad: &mut [f64],
) -> f64 {
    let acts = forward(sizes, offs, params, row, task);
    let layers = sizes.len() - 1;
    let output = &acts[layers];

    let (loss, mut delta): (f64, Vec<f64>) = match task {
        Task::Regression => {
            let err = output[0] - target;
            (0.5 * err * err, vec![err])
        }
        Task::BinaryClassification => {
            let class = usize::from(target >= 0.5);
            let p = output[class].max(1e-15);
            let mut d = output.clone();
            d[class] -= 1.0;
            (-p.ln(), d)
        }
    };

    for l in (0..layers).rev() {
        let (w_off, b_off) = offs[l];
        let fan_in = sizes[l];
        let prev = &acts[l];
        let mut delta_prev = vec![0.0; fan_in];
        for (o, &d) in delta.iter().enumerate() {
            grad[b_off + o] += d * scale;
            let w_row = w_off + o * fan_in;
            for i in 0..fan_in {
                grad[w_row + i] += d * prev[i] * scale;
                delta_prev[i] += params[w_row + i] * d;
            }
        }
        if l > 0 {
            // ReLU gate: activation 0 means the unit was clamped.
            for (dp, &a) in delta_prev.iter_mut().zip(prev) {
                if a <= 0.0 {
                    *dp = 0.0;
                }
            }
        }
        delta = delta_prev;
    }
    loss
}

/// Mean loss and gradient over a batch of row indices.
fn batch_gradients(
    sizes: &[usize],
    offs: &[(usize, usize)],
    params: &[f64],
    x: &[Vec<f64>],
    targets: &[f64],
    batch: &[usize],
    task: Task,
) -> (f64, Vec<f64>) {
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for &i in batch {
        loss += backward(sizes, offs, params, &x[i], targets[i], task, scale, &mut grad) * scale;
    }
    (loss, grad)
}

fn he_init(sizes: &[usize], seed: u64) -> Vec<f64> {
    let offs = offsets(sizes);
    let mut params = vec![0.0; count_params(sizes)];
    let mut rng = stream_rng(seed, 0);
    for (l, &(w_off, b_off)) in offs.iter().enumerate() {
        let fan_in = sizes[l];
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid sd");
        for w in params[w_off..b_off].iter_mut() {
            *w = normal.sample(&mut rng);
        }
        // Biases start at zero.
    }
    params
}

fn validate_fit(
    x: &[Vec<f64>],
    n_targets: usize,
    variation_id: u8,
    hyper: &MlpHyper,
) -> Result<&'static [usize], ModelError> {
    let hidden = variation_layers(variation_id)?;
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
    if hyper.batch_size == 0 || hyper.learning_rate <= 0.0 {
        return Err(ModelError::InvalidHyper {
            detail: "batch_size must be >= 1 and learning_rate > 0".into(),
        });
    }
    Ok(hidden)
}

/// Adam state and step (β₁ 0.9, β₂ 0.999, ε 1e-8).
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = B1 * *m + (1.0 - B1) * g;
            *v = B2 * *v + (1.0 - B2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + EPS);
        }
    }
}

impl MlpModel {
    fn train(
        x: &[Vec<f64>],
        targets: &[f64],
        variation_id: u8,
        task: Task,
        hyper: &MlpHyper,
        y_mean: f64,
        y_sd: f64,
    ) -> Result<Self, ModelError> {
        let hidden = validate_fit(x, targets.len(), variation_id, hyper)?;
        let p = x[0].len();
        let out_dim = match task {
            Task::Regression => 1,
            Task::BinaryClassification => 2,
        };
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(p);
        sizes.extend_from_slice(hidden);
        sizes.push(out_dim);
        let offs = offsets(&sizes);

        let mut params = he_init(&sizes, hyper.seed);
        let mut adam = Adam::new(params.len(), hyper.learning_rate);
        let mut shuffle_rng = stream_rng(hyper.seed, 1);

        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut history = Vec::new();
        let mut best = f64::INFINITY;
        let mut stale = 0usize;
        for epoch in 0..hyper.epochs {
            order.shuffle(&mut shuffle_rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(hyper.batch_size) {
                let (loss, grad) =
                    batch_gradients(&sizes, &offs, &params, x, targets, batch, task);
                if !loss.is_finite() {
                    return Err(ModelError::DivergedLoss { epoch });
                }
                epoch_loss += loss * batch.len() as f64;
                adam.step(&mut params, &grad);
            }
            epoch_loss /= x.len() as f64;
            history.push(epoch_loss);

            // Targets are standardized, so losses are O(1) across problems
            // and an absolute improvement floor is meaningful: an epoch only
            // resets the plateau if it beats the best loss by at least this.
            const MIN_IMPROVEMENT: f64 = 1e-5;
            if epoch_loss < best - MIN_IMPROVEMENT {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= hyper.patience {
                    break;
                }
            }
        }

        Ok(Self {
            variation_id,
            task,
            sizes,
            params,
            y_mean,
            y_sd,
            loss_history: history,
        })
    }

    /// Fit a regressor; the target is standardized internally so the
    /// default learning rate works across target scales.
    pub fn fit_regression(
        x: &[Vec<f64>],
        y: &[f64],
        variation_id: u8,
        hyper: &MlpHyper,
    ) -> Result<Self, ModelError> {
        if y.is_empty() {
            return Err(ModelError::EmptyData);
        }
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n;
        let y_sd = var.sqrt().max(1e-12);
        let scaled: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_sd).collect();
        Self::train(x, &scaled, variation_id, Task::Regression, hyper, y_mean, y_sd)
    }

    pub fn fit_classification(
        x: &[Vec<f64>],
        labels: &[bool],
        variation_id: u8,
        hyper: &MlpHyper,
    ) -> Result<Self, ModelError> {
        let targets: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
        Self::train(
            x,
            &targets,
            variation_id,
            Task::BinaryClassification,
            hyper,
            0.0,
            1.0,
        )
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_features(&self) -> usize {
        self.sizes[0]
    }

    /// Hidden-layer widths (excludes input and output).
    pub fn hidden_sizes(&self) -> &[usize] {
        &self.sizes[1..self.sizes.len() - 1]
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Mean training loss per epoch.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    fn check_rows(&self, x: &[Vec<f64>]) -> Result<(), ModelError> {
        for row in x {
            if row.len() != self.n_features() {
                return Err(ModelError::DimensionMismatch {
                    expected: self.n_features(),
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
        let offs = offsets(&self.sizes);
        Ok(x.iter()
            .map(|row| {
                let acts = forward(&self.sizes, &offs, &self.params, row, self.task);
                acts.last().expect("output layer")[0] * self.y_sd + self.y_mean
            })
            .collect())
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<[f64; 2]>, ModelError> {
        self.check_rows(x)?;
        if self.task != Task::BinaryClassification {
            return Err(ModelError::WrongTask {
                expected: Task::BinaryClassification,
                found: self.task,
            });
        }
        let offs = offsets(&self.sizes);
        Ok(x.iter()
            .map(|row| {
                let acts = forward(&self.sizes, &offs, &self.params, row, self.task);
                let out = acts.last().expect("output layer");
                [out[0], out[1]]
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

/// Maximum relative disagreement between backprop and central finite
/// differences (h = 1e-5) over every parameter on the given batch.
///
/// Models above 5000 parameters are not checked directly: a fresh copy
/// with all hidden widths halved (repeatedly, until it fits) stands in,
/// since the backprop code under test is identical for every shape.
/// `targets` are regression values or class indicators (0.0 / 1.0).
pub fn gradient_check(
    model: &MlpModel,
    x: &[Vec<f64>],
    targets: &[f64],
) -> Result<f64, ModelError> {
    if x.is_empty() || x.len() != targets.len() {
        return Err(ModelError::EmptyData);
    }
    let mut subject = model.clone();
    while subject.params.len() > 5000 {
        let mut sizes = subject.sizes.clone();
        for s in sizes.iter_mut().skip(1).take(subject.sizes.len() - 2) {
            *s = (*s / 2).max(1);
        }
        subject = MlpModel {
            variation_id: model.variation_id,
            task: model.task,
            params: he_init(&sizes, 0),
            sizes,
            y_mean: 0.0,
            y_sd: 1.0,
            loss_history: Vec::new(),
        };
    }
    Ok(max_relative_error(&subject, x, targets, None))
}

/// The check body; `corrupt_layer` doubles one layer's analytic weight
/// gradients so tests can prove the harness detects broken gradients.
fn max_relative_error(
    model: &MlpModel,
    x: &[Vec<f64>],
    targets: &[f64],
    corrupt_layer: Option<usize>,
) -> f64 {
    let sizes = &model.sizes;
    let offs = offsets(sizes);
    let batch: Vec<usize> = (0..x.len()).collect();
    let (_, mut analytic) =
        batch_gradients(sizes, &offs, &model.params, x, targets, &batch, model.task);
    if let Some(layer) = corrupt_layer {
        let (w_off, b_off) = offs[layer];
        for g in analytic[w_off..b_off].iter_mut() {
            *g *= 2.0;
        }
    }

    let h = 1e-5;
    let mut params = model.params.clone();
    let mut worst = 0.0f64;
    for idx in 0..params.len() {
        let saved = params[idx];
        params[idx] = saved + h;
        let (loss_hi, _) = loss_only(sizes, &offs, &params, x, targets, model.task);
        params[idx] = saved - h;
        let (loss_lo, _) = loss_only(sizes, &offs, &params, x, targets, model.task);
        params[idx] = saved;
        let numeric = (loss_hi - loss_lo) / (2.0 * h);
        let denom = analytic[idx].abs().max(numeric.abs()).max(1e-3);
        worst = worst.max((analytic[idx] - numeric).abs() / denom);
    }
    worst
}

fn loss_only(
    sizes: &[usize],
    offs: &[(usize, usize)],
    params: &[f64],
    x: &[Vec<f64>],
    targets: &[f64],
    task: Task,
) -> (f64, ()) {
    let scale = 1.0 / x.len() as f64;
    let mut loss = 0.0;
    for (row, &t) in x.iter().zip(targets) {
        let acts = forward(sizes, offs, params, row, task);
        let out = acts.last().expect("output layer");
        loss += scale
            * match task {
                Task::Regression => {
                    let e = out[0] - t;
                    0.5 * e * e
                }
                Task::BinaryClassification => {
                    let class = usize::from(t >= 0.5);
                    -out[class].max(1e-15).ln()
                }
            };
    }
    (loss, ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn quick_hyper(epochs: usize, seed: u64) -> MlpHyper {
        MlpHyper {
            learning_rate: 1e-2,
            epochs,
            batch_size: 32,
            patience: epochs,
            seed,
        }
    }

    #[test]
    fn variation_table_shapes() {
        assert_eq!(variation_layers(1).unwrap(), &[20, 10, 5]);
        assert_eq!(variation_layers(5).unwrap(), &[100, 50, 25, 12, 6]);
        assert_eq!(
            variation_layers(13).unwrap(),
            &[160, 80, 40, 40, 40, 40, 20, 10]
        );
        assert!(matches!(
            variation_layers(0),
            Err(ModelError::InvalidVariation { .. })
        ));
        assert!(matches!(
            variation_layers(14),
            Err(ModelError::InvalidVariation { .. })
        ));
    }

    #[test]
    fn variation_13_builds_its_stack() {
        let x = vec![vec![0.0; 4]; 6];
        let y = vec![1.0; 6];
        let model = MlpModel::fit_regression(&x, &y, 13, &quick_hyper(1, 0)).unwrap();
        assert_eq!(model.hidden_sizes(), &[160, 80, 40, 40, 40, 40, 20, 10]);
        assert_eq!(model.variation_id, 13);
    }

    #[test]
    fn xor_learned_by_variation_1() {
        let x = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let y = vec![false, true, true, false];
        let hyper = MlpHyper {
            learning_rate: 1e-2,
            epochs: 2000,
            batch_size: 4,
            patience: 2000,
            seed: 0,
        };
        let model = MlpModel::fit_classification(&x, &y, 1, &hyper).unwrap();
        assert_eq!(model.predict_labels(&x).unwrap(), y);
    }

    #[test]
    fn regression_fits_planted_line() {
        let mut rng = stream_rng(3, 0);
        let x: Vec<Vec<f64>> = (0..64).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let model = MlpModel::fit_regression(&x, &y, 1, &quick_hyper(300, 1)).unwrap();
        let pred = model.predict(&x).unwrap();
        let rmse = (pred
            .iter()
            .zip(&y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / y.len() as f64)
            .sqrt();
        assert!(rmse < 0.3, "rmse {rmse}");
    }

    #[test]
    fn loss_decreases_over_first_ten_epochs_seed_averaged() {
        let mut first = 0.0;
        let mut tenth = 0.0;
        for seed in 0..10 {
            let mut rng = stream_rng(seed, 5);
            let x: Vec<Vec<f64>> = (0..64)
                .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let y: Vec<f64> = x.iter().map(|r| r[0] - 2.0 * r[1] + 0.5 * r[2]).collect();
            let hyper = MlpHyper {
                epochs: 10,
                patience: 10,
                seed,
                ..MlpHyper::default()
            };
            let model = MlpModel::fit_regression(&x, &y, 1, &hyper).unwrap();
            first += model.loss_history()[0];
            tenth += model.loss_history()[9];
        }
        assert!(tenth < first, "mean tenth-epoch loss {tenth} vs first {first}");
    }

    #[test]
    fn gradient_check_on_fresh_small_net() {
        let mut rng = stream_rng(9, 0);
        let x: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let model = MlpModel::fit_regression(&x, &y, 1, &quick_hyper(1, 2)).unwrap();
        let err = gradient_check(&model, &x, &y).unwrap();
        assert!(err < 1e-4, "max relative error {err}");

        // Classification path too.
        let labels: Vec<f64> = (0..5).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
        let clf = MlpModel::fit_classification(
            &x,
            &labels.iter().map(|&v| v >= 0.5).collect::<Vec<_>>(),
            1,
            &quick_hyper(1, 3),
        )
        .unwrap();
        let err = gradient_check(&clf, &x, &labels).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn gradient_check_downsizes_large_nets() {
        let x = vec![vec![0.5; 4]; 5];
        let y = vec![1.0; 5];
        let model = MlpModel::fit_regression(&x, &y, 13, &quick_hyper(1, 0)).unwrap();
        assert!(model.param_count() > 5000);
        let err = gradient_check(&model, &x, &y).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn zero_net_on_zero_batch_has_zero_error() {
        let sizes = vec![3, 4, 1];
        let model = MlpModel {
            variation_id: 1,
            task: Task::Regression,
            params: vec![0.0; count_params(&sizes)],
            sizes,
            y_mean: 0.0,
            y_sd: 1.0,
            loss_history: Vec::new(),
        };
        let x = vec![vec![0.0; 3]; 4];
        let y = vec![0.0; 4];
        assert_eq!(gradient_check(&model, &x, &y).unwrap(), 0.0);
    }

    #[test]
    fn corrupted_gradient_detected() {
        let mut rng = stream_rng(14, 0);
        let x: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let model = MlpModel::fit_regression(&x, &y, 1, &quick_hyper(1, 4)).unwrap();
        let err = max_relative_error(&model, &x, &y, Some(0));
        assert!(err > 0.1, "doubled layer-0 gradients must be flagged, err {err}");
    }

    #[test]
    fn diverged_loss_reported() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 1e3]).collect();
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let hyper = MlpHyper {
            learning_rate: 1e300,
            epochs: 50,
            batch_size: 4,
            patience: 50,
            seed: 0,
        };
        assert!(matches!(
            MlpModel::fit_regression(&x, &y, 1, &hyper),
            Err(ModelError::DivergedLoss { .. })
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = stream_rng(21, 0);
        let x: Vec<Vec<f64>> = (0..32)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] + r[1]).collect();
        let a = MlpModel::fit_regression(&x, &y, 2, &quick_hyper(20, 7)).unwrap();
        let b = MlpModel::fit_regression(&x, &y, 2, &quick_hyper(20, 7)).unwrap();
        assert_eq!(a, b);
        let c = MlpModel::fit_regression(&x, &y, 2, &quick_hyper(20, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn early_stop_on_plateau() {
        // Constant target from constant inputs: the loss decays geometrically
        // toward zero, so per-epoch gains soon drop below the improvement
        // floor and training must stop well short of the epoch budget.
        let x = vec![vec![1.0]; 16];
        let y = vec![5.0; 16];
        let hyper = MlpHyper {
            epochs: 500,
            patience: 10,
            ..MlpHyper::default()
        };
        let model = MlpModel::fit_regression(&x, &y, 1, &hyper).unwrap();
        assert!(
            model.loss_history().len() < 500,
            "ran {} epochs",
            model.loss_history().len()
        );
    }
}
