//! Train regression backbones on a cohort and score a held-out fold.
//!
//! The flow mirrors the evaluation harness one step at a time: split the
//! dataset, fit the scaler on the training fold only, transform both
//! folds, fit a model, and report NRMSE (RMSE divided by the mean of the
//! true targets) against the train-mean baseline. Every backbone is
//! implemented from scratch in this crate and serializes to a versioned
//! JSON artifact that loads back bit-for-bit.
//!
//! Run with: cargo run --example train_and_predict

use glucolens::eval::{nrmse, split, synth_cohort, SplitKind, SplitSpec, SynthCohortSpec};
use glucolens::features::{assemble_dataset, standardize, FeatureSetKind, TargetKind};
use glucolens::glycemic::TargetConfig;
use glucolens::models::{
    load_model, save_model, AnyModel, ForestConfig, ForestModel, RidgeModel,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = synth_cohort(&SynthCohortSpec {
        n_participants: 6,
        ..SynthCohortSpec::default()
    });
    let (dataset, _) = assemble_dataset(&cohort, FeatureSetKind::All, &TargetConfig::default());
    println!("{} lunches, {} features", dataset.len(), dataset.n_features());

    let spec = SplitSpec {
        kind: SplitKind::RegressionFraction { test_fraction: 0.2 },
        seed: 42,
    };
    let (train, test) = split(&dataset, &spec)?;
    let (scaler, train_scaled) = standardize(&train)?;
    let test_scaled = scaler.transform_dataset(&test)?;

    let y_train = train_scaled.target_column(TargetKind::Auc);
    let y_test = test_scaled.target_column(TargetKind::Auc);

    // Baseline: always predict the training mean.
    let mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
    let baseline: Vec<f64> = vec![mean; y_test.len()];
    println!("train-mean baseline NRMSE: {:.4}", nrmse(&y_test, &baseline)?);

    let ridge = RidgeModel::fit(train_scaled.features(), &y_train, 1.0)?;
    let ridge_nrmse = nrmse(&y_test, &ridge.predict(test_scaled.features())?)?;
    println!("ridge (alpha 1.0) NRMSE:   {ridge_nrmse:.4}");

    let forest = ForestModel::fit_regression(
        train_scaled.features(),
        &y_train,
        &ForestConfig {
            n_estimators: 50,
            seed: 42,
            ..ForestConfig::default()
        },
    )?;
    let forest_nrmse = nrmse(&y_test, &forest.predict(test_scaled.features())?)?;
    println!("forest (50 trees) NRMSE:   {forest_nrmse:.4}");

    // Serialized models reload to identical predictions.
    let model = AnyModel::Forest(forest);
    let mut buf = Vec::new();
    save_model(&model, &mut buf)?;
    let restored = load_model(buf.as_slice())?;
    assert_eq!(
        model.predict(test_scaled.features())?,
        restored.predict(test_scaled.features())?,
    );
    println!("saved and reloaded the forest; predictions identical");
    Ok(())
}
