//! Training-set resampling: Gaussian-noise augmentation on scaled
//! features and ADASYN minority oversampling for class balance.
//!
//! Both operations append rows flagged `synthetic = true` after the
//! untouched originals and are deterministic given their seed, with
//! per-row noise streams so parallel generation cannot reorder draws.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Dataset;
use crate::rng::stream_rng;

#[derive(Debug, Error, PartialEq)]
pub enum ResampleError {
    #[error(
        "feature {feature} looks unscaled (mean {mean:.3}, sd {sd:.3}); \
         standardize first or call the unchecked variant"
    )]
    UnscaledData { feature: String, mean: f64, sd: f64 },
    #[error("dataset has rows of only one class")]
    SingleClass,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sigma {sigma} is negative")]
    NegativeSigma { sigma: f64 },
    #[error("beta {beta} outside (0, 1]")]
    BetaOutOfRange { beta: f64 },
}

/// Gaussian-noise augmentation settings (noise sd in z-score units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub sigma: f64,
    /// Noisy copies made of each original row.
    pub factor: u32,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            sigma: 0.05,
            factor: 1,
            seed: 0,
        }
    }
}

/// ADASYN oversampling settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdasynConfig {
    pub k_neighbors: usize,
    /// Fraction of the class imbalance to close; 1 = full balance.
    pub beta: f64,
    pub seed: u64,
}

impl Default for AdasynConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            beta: 1.0,
            seed: 0,
        }
    }
}

/// Check the columns look standardized: each feature mean within ±0.5 and
/// sd in [0.5, 2]. Constant all-zero columns pass — they are exactly what
/// the standardizer emits for zero-variance features.
fn check_scaled(dataset: &Dataset) -> Result<(), ResampleError> {
    let n = dataset.len() as f64;
    for (j, name) in dataset.feature_names().iter().enumerate() {
        let mean = dataset.features().iter().map(|r| r[j]).sum::<f64>() / n;
        let var = dataset
            .features()
            .iter()
            .map(|r| (r[j] - mean) * (r[j] - mean))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        if mean == 0.0 && sd == 0.0 {
            continue;
        }
        if mean.abs() > 0.5 || !(0.5..=2.0).contains(&sd) {
            return Err(ResampleError::UnscaledData {
                feature: name.clone(),
                mean,
                sd,
            });
        }
    }
    Ok(())
}

/// Append `factor` noisy copies of every row: i.i.d. N(0, sigma²) added
/// per feature, targets copied unchanged. Output size is `(1+factor)·n`
/// with the originals as a prefix.
///
/// Errors with [`ResampleError::UnscaledData`] when a feature column does
/// not look standardized; [`gaussian_augment_unchecked`] skips that check.
pub fn gaussian_augment(dataset: &Dataset, cfg: &AugmentConfig) -> Result<Dataset, ResampleError> {
    if dataset.is_empty() {
        return Err(ResampleError::EmptyDataset);
    }
    check_scaled(dataset)?;
    gaussian_augment_unchecked(dataset, cfg)
}

/// [`gaussian_augment`] without the scaled-data heuristic, for callers
/// that deliberately augment data on another scale.
pub fn gaussian_augment_unchecked(
    dataset: &Dataset,
    cfg: &AugmentConfig,
) -> Result<Dataset, ResampleError> {
    if dataset.is_empty() {
        return Err(ResampleError::EmptyDataset);
    }
    if cfg.sigma < 0.0 || !cfg.sigma.is_finite() {
        return Err(ResampleError::NegativeSigma { sigma: cfg.sigma });
    }

    let n = dataset.len();
    let normal = Normal::new(0.0, cfg.sigma.max(f64::MIN_POSITIVE)).expect("valid sd");
    let mut out = dataset.clone();
    for copy in 0..cfg.factor {
        for (i, row) in dataset.features().iter().enumerate() {
            // One stream per (copy, row) so generation order never matters.
            let mut rng = stream_rng(cfg.seed, u64::from(copy) * n as u64 + i as u64);
            let noisy: Vec<f64> = if cfg.sigma == 0.0 {
                row.clone()
            } else {
                row.iter().map(|v| v + normal.sample(&mut rng)).collect()
            };
            out.push_row(noisy, dataset.targets()[i], true)
                .expect("same width as source");
        }
    }
    Ok(out)
}

/// Euclidean distance between feature rows.
fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Indices of the `k` nearest rows to `target` among `candidates`
/// (excluding `target` itself), ties broken by lowest index.
fn k_nearest(
    features: &[Vec<f64>],
    target: usize,
    candidates: &[usize],
    k: usize,
) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&i| i != target)
        .map(|&i| (distance(&features[target], &features[i]), i))
        .collect();
    scored.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    scored.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Allocate `total` items proportionally to `weights` using the
/// largest-remainder method; ties broken by lowest index.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        // Degenerate weights: spread uniformly.
        let n = weights.len();
        let mut alloc = vec![total / n; n];
        for item in alloc.iter_mut().take(total % n) {
            *item += 1;
        }
        return alloc;
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        alloc[i] += 1;
    }
    alloc
}

/// ADASYN oversampling of the minority hyperglycemia class.
///
/// Generates `(N_maj − N_min)·beta` synthetic minority rows, allocated
/// per minority point by the majority fraction of its k nearest
/// neighbours, each synthesized on the segment toward a random minority
/// neighbour. Originals are untouched and remain a prefix of the output.
pub fn adasyn_balance(dataset: &Dataset, cfg: &AdasynConfig) -> Result<Dataset, ResampleError> {
    if dataset.is_empty() {
        return Err(ResampleError::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&cfg.beta) || cfg.beta == 0.0 {
        return Err(ResampleError::BetaOutOfRange { beta: cfg.beta });
    }
    let labels = dataset.labels();
    let positives: Vec<usize> = (0..dataset.len()).filter(|&i| labels[i]).collect();
    let negatives: Vec<usize> = (0..dataset.len()).filter(|&i| !labels[i]).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(ResampleError::SingleClass);
    }

    let (minority, majority) = if positives.len() <= negatives.len() {
        (positives, negatives)
    } else {
        (negatives, positives)
    };
    let total = ((majority.len() - minority.len()) as f64 * cfg.beta).round() as usize;
    if total == 0 {
        return Ok(dataset.clone());
    }

    let features = dataset.features();
    let everyone: Vec<usize> = (0..dataset.len()).collect();
    let k_ratio = cfg.k_neighbors.max(1);
    // Majority fraction of each minority point's k-NN over the whole set.
    let ratios: Vec<f64> = minority
        .iter()
        .map(|&i| {
            let neighbors = k_nearest(features, i, &everyone, k_ratio);
            if neighbors.is_empty() {
                return 0.0;
            }
            let majority_count = neighbors.iter().filter(|&&j| labels[j] != labels[i]).count();
            majority_count as f64 / neighbors.len() as f64
        })
        .collect();
    let alloc = largest_remainder(&ratios, total);

    // Synthesis neighbours come from the minority class only; clip k when
    // the class is small.
    let k_syn = cfg.k_neighbors.min(minority.len().saturating_sub(1)).max(1);

    let mut out = dataset.clone();
    for (mi, &i) in minority.iter().enumerate() {
        if alloc[mi] == 0 {
            continue;
        }
        let neighbors = k_nearest(features, i, &minority, k_syn);
        let mut rng = stream_rng(cfg.seed, i as u64);
        for _ in 0..alloc[mi] {
            let row = if neighbors.is_empty() {
                // A lone minority point has nothing to interpolate toward:
                // duplicate it.
                features[i].clone()
            } else {
                let z = neighbors[rng.gen_range(0..neighbors.len())];
                let lambda: f64 = rng.gen_range(0.0..=1.0);
                features[i]
                    .iter()
                    .zip(&features[z])
                    .map(|(a, b)| a + lambda * (b - a))
                    .collect()
            };
            out.push_row(row, dataset.targets()[i], true)
                .expect("same width as source");
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Dataset, FeatureSetKind};
    use crate::glycemic::GlycemicTargets;
    use proptest::prelude::*;
    use rand::Rng;

    /// A dataset over the SelfGl width (17 features) with the first two
    /// features set and the rest zero.
    fn dataset_from(rows: &[(f64, f64, bool)]) -> Dataset {
        let mut ds = Dataset::new(FeatureSetKind::SelfGl);
        for &(a, b, hyper) in rows {
            let mut values = vec![0.0; 17];
            values[0] = a;
            values[1] = b;
            let targets = GlycemicTargets {
                auc: 100.0 * a,
                iauc: 10.0 * a,
                max_bgl: if hyper { 160.0 } else { 120.0 },
                hyperglycemic: hyper,
            };
            ds.push_row(values, targets, false).unwrap();
        }
        ds
    }

    /// Roughly standardized random rows: N(0,1)-ish via uniform sums.
    fn scaled_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = crate::rng::stream_rng(seed, 0);
        let rows: Vec<(f64, f64, bool)> = (0..n)
            .map(|_| {
                let a: f64 = (0..12).map(|_| rng.gen_range(0.0..1.0)).sum::<f64>() - 6.0;
                let b: f64 = (0..12).map(|_| rng.gen_range(0.0..1.0)).sum::<f64>() - 6.0;
                (a, b, a > 0.0)
            })
            .collect();
        // Zero columns beyond the first two are fine: the scaler emits
        // all-zero columns for zero-variance features.
        dataset_from(&rows)
    }

    #[test]
    fn augment_size_and_prefix() {
        let ds = scaled_dataset(10, 7);
        let out = gaussian_augment(&ds, &AugmentConfig::default()).unwrap();
        assert_eq!(out.len(), 20);
        assert_eq!(out.n_synthetic(), 10);
        for i in 0..10 {
            assert_eq!(out.features()[i], ds.features()[i], "originals untouched");
            assert!(!out.synthetic()[i]);
            assert!(out.synthetic()[10 + i]);
        }
    }

    #[test]
    fn augment_sigma_zero_copies_exactly() {
        let ds = scaled_dataset(6, 3);
        let cfg = AugmentConfig {
            sigma: 0.0,
            ..AugmentConfig::default()
        };
        let out = gaussian_augment(&ds, &cfg).unwrap();
        for i in 0..6 {
            assert_eq!(out.features()[6 + i], ds.features()[i]);
        }
    }

    #[test]
    fn augment_targets_are_repeated_multiset() {
        let ds = scaled_dataset(8, 11);
        let cfg = AugmentConfig {
            factor: 3,
            ..AugmentConfig::default()
        };
        let out = gaussian_augment(&ds, &cfg).unwrap();
        assert_eq!(out.len(), 32);
        let mut expected: Vec<String> = Vec::new();
        for _ in 0..4 {
            for t in ds.targets() {
                expected.push(format!("{t:?}"));
            }
        }
        expected.sort();
        let mut got: Vec<String> = out.targets().iter().map(|t| format!("{t:?}")).collect();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn augment_deterministic_and_seed_sensitive() {
        let ds = scaled_dataset(9, 5);
        let cfg = AugmentConfig {
            seed: 42,
            ..AugmentConfig::default()
        };
        let a = gaussian_augment(&ds, &cfg).unwrap();
        let b = gaussian_augment(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        let c = gaussian_augment(
            &ds,
            &AugmentConfig {
                seed: 43,
                ..cfg
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn augment_rejects_unscaled_data() {
        let ds = dataset_from(&[(150.0, 80.0, true), (120.0, 95.0, false)]);
        match gaussian_augment(&ds, &AugmentConfig::default()) {
            Err(ResampleError::UnscaledData { feature, .. }) => {
                assert_eq!(feature, "fasting_glucose")
            }
            other => panic!("expected UnscaledData, got {other:?}"),
        }
        // The unchecked variant accepts the same data.
        let out = gaussian_augment_unchecked(&ds, &AugmentConfig::default()).unwrap();
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn augment_mean_stays_close_over_many_seeds() {
        let ds = scaled_dataset(50, 1);
        let n = ds.len() as f64;
        let sigma = 0.05;
        let bound = 4.0 * sigma / (n * 1.0).sqrt();
        for seed in 0..100 {
            let out = gaussian_augment(
                &ds,
                &AugmentConfig {
                    sigma,
                    factor: 1,
                    seed,
                },
            )
            .unwrap();
            for j in 0..2 {
                let orig: f64 = ds.features().iter().map(|r| r[j]).sum::<f64>() / n;
                let aug: f64 =
                    out.features().iter().map(|r| r[j]).sum::<f64>() / out.len() as f64;
                assert!(
                    (orig - aug).abs() <= bound,
                    "seed {seed} feature {j}: drift {} > {bound}",
                    (orig - aug).abs()
                );
            }
        }
    }

    #[test]
    fn adasyn_counts_and_prefix() {
        // Minority 5 positives, majority 20 negatives.
        let mut rows = Vec::new();
        let mut rng = crate::rng::stream_rng(99, 0);
        for i in 0..25 {
            let hyper = i < 5;
            let center = if hyper { 1.5 } else { -1.5 };
            rows.push((
                center + rng.gen_range(-0.5..0.5),
                center + rng.gen_range(-0.5..0.5),
                hyper,
            ));
        }
        let ds = dataset_from(&rows);
        let out = adasyn_balance(&ds, &AdasynConfig::default()).unwrap();
        assert_eq!(out.len(), 40, "15 synthetic rows close the gap");
        let labels = out.labels();
        let pos = labels.iter().filter(|&&l| l).count();
        let neg = labels.len() - pos;
        assert_eq!(pos, neg, "balanced after beta = 1");
        for i in 0..25 {
            assert_eq!(out.features()[i], ds.features()[i]);
            assert!(!out.synthetic()[i]);
        }
        for i in 25..40 {
            assert!(out.synthetic()[i]);
            assert!(labels[i], "synthetic rows are minority class");
        }
    }

    #[test]
    fn adasyn_balanced_input_unchanged() {
        let ds = dataset_from(&[
            (1.0, 1.0, true),
            (1.2, 0.8, true),
            (-1.0, -1.0, false),
            (-1.2, -0.8, false),
        ]);
        let out = adasyn_balance(&ds, &AdasynConfig::default()).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn adasyn_synthetic_points_lie_on_minority_segments() {
        let mut rows = Vec::new();
        let mut rng = crate::rng::stream_rng(7, 0);
        for i in 0..30 {
            let hyper = i < 8;
            let center = if hyper { 1.0 } else { -1.0 };
            rows.push((
                center + rng.gen_range(-0.8..0.8),
                center + rng.gen_range(-0.8..0.8),
                hyper,
            ));
        }
        let ds = dataset_from(&rows);
        let out = adasyn_balance(&ds, &AdasynConfig::default()).unwrap();

        let minority: Vec<&Vec<f64>> = (0..30)
            .filter(|&i| ds.labels()[i])
            .map(|i| &ds.features()[i])
            .collect();
        for i in 30..out.len() {
            let p = &out.features()[i];
            let on_segment = minority.iter().enumerate().any(|(a, xa)| {
                minority.iter().skip(a).any(|xb| {
                    // p = xa + λ(xb − xa) for some λ in [0,1], per coordinate.
                    let mut lambda: Option<f64> = None;
                    let mut ok = true;
                    for ((pa, a), b) in p.iter().zip(xa.iter()).zip(xb.iter()) {
                        let span = b - a;
                        if span.abs() < 1e-12 {
                            if (pa - a).abs() > 1e-9 {
                                ok = false;
                                break;
                            }
                        } else {
                            let l = (pa - a) / span;
                            if !(-1e-9..=1.0 + 1e-9).contains(&l) {
                                ok = false;
                                break;
                            }
                            match lambda {
                                None => lambda = Some(l),
                                Some(prev) if (prev - l).abs() > 1e-9 => {
                                    ok = false;
                                    break;
                                }
                                _ => {}
                            }
                        }
                    }
                    ok
                })
            });
            assert!(on_segment, "row {i} is not on any minority segment");
        }
    }

    #[test]
    fn adasyn_single_class_and_empty_rejected() {
        let ds = dataset_from(&[(1.0, 1.0, true), (1.2, 0.8, true)]);
        assert_eq!(
            adasyn_balance(&ds, &AdasynConfig::default()),
            Err(ResampleError::SingleClass)
        );
        let empty = Dataset::new(FeatureSetKind::SelfGl);
        assert_eq!(
            adasyn_balance(&empty, &AdasynConfig::default()),
            Err(ResampleError::EmptyDataset)
        );
        assert_eq!(
            gaussian_augment(&empty, &AugmentConfig::default()),
            Err(ResampleError::EmptyDataset)
        );
    }

    #[test]
    fn adasyn_lone_minority_point_duplicates() {
        let ds = dataset_from(&[
            (2.0, 2.0, true),
            (-1.0, -1.0, false),
            (-1.1, -0.9, false),
            (-0.9, -1.1, false),
        ]);
        let out = adasyn_balance(&ds, &AdasynConfig::default()).unwrap();
        assert_eq!(out.len(), 6);
        for i in 4..6 {
            assert_eq!(out.features()[i], ds.features()[0]);
        }
    }

    #[test]
    fn largest_remainder_hits_total_exactly() {
        let alloc = largest_remainder(&[0.5, 0.3, 0.2], 10);
        assert_eq!(alloc.iter().sum::<usize>(), 10);
        assert_eq!(alloc, vec![5, 3, 2]);

        let alloc = largest_remainder(&[1.0, 1.0, 1.0], 10);
        assert_eq!(alloc.iter().sum::<usize>(), 10);
        // Ties broken toward lower indices.
        assert_eq!(alloc, vec![4, 3, 3]);

        let degenerate = largest_remainder(&[0.0, 0.0], 5);
        assert_eq!(degenerate, vec![3, 2]);
    }

    proptest! {
        #[test]
        fn adasyn_closes_gap_within_slack(
            n_min in 2usize..10,
            n_maj in 10usize..40,
            seed in 0u64..500,
        ) {
            prop_assume!(n_min < n_maj);
            let mut rng = crate::rng::stream_rng(seed, 1);
            let mut rows = Vec::new();
            for i in 0..(n_min + n_maj) {
                let hyper = i < n_min;
                let center = if hyper { 1.0 } else { -1.0 };
                rows.push((
                    center + rng.gen_range(-0.9..0.9),
                    center + rng.gen_range(-0.9..0.9),
                    hyper,
                ));
            }
            let ds = dataset_from(&rows);
            let cfg = AdasynConfig { seed, ..AdasynConfig::default() };
            let out = adasyn_balance(&ds, &cfg).unwrap();

            let pos = out.labels().iter().filter(|&&l| l).count();
            let neg = out.len() - pos;
            prop_assert!(pos.abs_diff(neg) <= cfg.k_neighbors);

            // Determinism: identical seed, identical output.
            let again = adasyn_balance(&ds, &cfg).unwrap();
            prop_assert_eq!(out, again);
        }
    }
}
