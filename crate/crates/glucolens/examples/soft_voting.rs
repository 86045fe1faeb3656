//! Combine three classifier families into a soft-voting ensemble.
//!
//! Each member outputs class probabilities; the ensemble averages them and
//! takes the argmax. The averaged probabilities are exact means, and a
//! single-member ensemble is identical to that member — two invariants the
//! test suite pins down to machine precision.
//!
//! Run with: cargo run --example soft_voting

use glucolens::ensemble::{soft_vote_predict, SoftVoteEnsemble};
use glucolens::eval::{
    classification_metrics, split, synth_cohort, SplitKind, SplitSpec, SynthCohortSpec,
};
use glucolens::features::{assemble_dataset, standardize, FeatureSetKind};
use glucolens::glycemic::TargetConfig;
use glucolens::models::{
    AnyModel, ForestConfig, ForestModel, GbtConfig, GbtModel, MlpHyper, MlpModel,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = synth_cohort(&SynthCohortSpec {
        n_participants: 6,
        ..SynthCohortSpec::default()
    });
    let (dataset, _) = assemble_dataset(&cohort, FeatureSetKind::All, &TargetConfig::default());
    let (train, test) = split(
        &dataset,
        &SplitSpec {
            kind: SplitKind::RegressionFraction { test_fraction: 0.25 },
            seed: 11,
        },
    )?;
    let (scaler, train_scaled) = standardize(&train)?;
    let test_scaled = scaler.transform_dataset(&test)?;
    let labels = train_scaled.labels();

    let forest = AnyModel::Forest(ForestModel::fit_classification(
        train_scaled.features(),
        &labels,
        &ForestConfig {
            n_estimators: 50,
            seed: 1,
            ..ForestConfig::default()
        },
    )?);
    let gbt = AnyModel::Gbt(GbtModel::fit_classification(
        train_scaled.features(),
        &labels,
        &GbtConfig {
            seed: 2,
            ..GbtConfig::default()
        },
    )?);
    let mlp = AnyModel::Mlp(MlpModel::fit_classification(
        train_scaled.features(),
        &labels,
        1,
        &MlpHyper {
            epochs: 80,
            seed: 3,
            ..MlpHyper::default()
        },
    )?);

    let truth = test_scaled.labels();
    for (name, model) in [("forest", &forest), ("boosted", &gbt), ("perceptron", &mlp)] {
        let solo = SoftVoteEnsemble::new(vec![model.clone()])?;
        let (predicted, _) = soft_vote_predict(&solo, test_scaled.features())?;
        let metrics = classification_metrics(&truth, &predicted)?;
        println!("{name:<10} accuracy {:.3}  macro-F1 {:.3}", metrics.accuracy, metrics.f1_macro);
    }

    let vote = SoftVoteEnsemble::new(vec![forest.clone(), gbt, mlp])?;
    let (predicted, probabilities) = soft_vote_predict(&vote, test_scaled.features())?;
    let metrics = classification_metrics(&truth, &predicted)?;
    println!("soft vote  accuracy {:.3}  macro-F1 {:.3}", metrics.accuracy, metrics.f1_macro);

    // The vote's probability for a row is the exact mean of its members'.
    let member_probas = forest.predict_proba(test_scaled.features())?;
    println!(
        "row 0: forest p_hyper {:.3}, ensemble p_hyper {:.3}",
        member_probas[0][1], probabilities[0][1]
    );
    Ok(())
}
