//! Search for diverse counterfactual explanations of a classification.
//!
//! Given a hyperglycemic lunch, the search looks for nearby feature
//! vectors the model classifies as normal, subject to constraints learned
//! from the training data: immutable features stay fixed, integer-coded
//! features stay on whole numbers, and every value stays inside the
//! training range. The k returned options are pushed apart by a diversity
//! term so they represent genuinely different interventions.
//!
//! Run with: cargo run --example counterfactual_explanations

use glucolens::counterfactual::{diff_report, generate, CfConstraints, CfRequest};
use glucolens::eval::{synth_cohort, SynthCohortSpec};
use glucolens::features::{assemble_dataset, FeatureSetKind};
use glucolens::glycemic::TargetConfig;
use glucolens::models::{AnyModel, ForestConfig, ForestModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = synth_cohort(&SynthCohortSpec {
        n_participants: 6,
        ..SynthCohortSpec::default()
    });
    let (dataset, _) = assemble_dataset(&cohort, FeatureSetKind::All, &TargetConfig::default());

    // The forest works on raw feature values, so the counterfactual search
    // and its report stay in natural units (grams, minutes, mg/dL).
    let model = AnyModel::Forest(ForestModel::fit_classification(
        dataset.features(),
        &dataset.labels(),
        &ForestConfig {
            n_estimators: 60,
            seed: 5,
            ..ForestConfig::default()
        },
    )?);

    // Explain the first lunch the model calls hyperglycemic.
    let probabilities = model.predict_proba(dataset.features())?;
    let row = probabilities
        .iter()
        .position(|p| p[1] > p[0])
        .expect("cohort contains hyperglycemic lunches");
    let instance = dataset.features()[row].clone();
    println!(
        "explaining row {row}: p_hyper {:.3}, target label normal",
        probabilities[row][1]
    );

    // BMI and the day of week cannot change; day of week and the
    // work-from-home flag must stay integral. Training data supplies the
    // per-feature value ranges.
    let constraints = CfConstraints::from_training(dataset.feature_names(), dataset.features())?;

    let request = CfRequest {
        seed: 13,
        budget: 4000,
        ..CfRequest::new(false, 3)
    };
    let set = generate(&model, &instance, &constraints, &request)?;
    println!(
        "found {} counterfactuals ({:?}) in {} model evaluations\n",
        set.counterfactuals.len(),
        set.status,
        set.evaluations_used
    );
    print!("{}", diff_report(&set));

    // Every option respects the constraints and actually flips the model.
    let bmi = dataset
        .feature_names()
        .iter()
        .position(|n| n == "bmi")
        .unwrap();
    for cf in &set.counterfactuals {
        assert_eq!(cf.values[bmi], instance[bmi], "immutable feature changed");
        assert!(!cf.label, "counterfactual does not flip the model");
    }
    println!("\nall options flip the model and leave BMI untouched");
    Ok(())
}
