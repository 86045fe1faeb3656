//! Build the five canonical feature sets from a cohort.
//!
//! Every set shares fifteen common features (demographics, CGM summaries,
//! meal timing, work schedule) and differs in two axes: the activity
//! source (sensor-measured posture durations vs the self-reported activity
//! score) and the diet encoding (the scalar glycemic load vs four
//! macronutrients). The fifth set, All, is the union. Column order is
//! canonical, so models, scalers, and saved artifacts stay compatible.
//!
//! Run with: cargo run --example feature_sets

use glucolens::eval::{synth_cohort, SynthCohortSpec};
use glucolens::features::{assemble_dataset, FeatureSetKind};
use glucolens::glycemic::TargetConfig;

fn main() {
    let spec = SynthCohortSpec {
        n_participants: 3,
        ..SynthCohortSpec::default()
    };
    let cohort = synth_cohort(&spec);
    let target_cfg = TargetConfig::default();

    for set in [
        FeatureSetKind::SensorGl,
        FeatureSetKind::SensorMacro,
        FeatureSetKind::SelfGl,
        FeatureSetKind::SelfMacro,
        FeatureSetKind::All,
    ] {
        let (dataset, skipped) = assemble_dataset(&cohort, set, &target_cfg);
        println!(
            "{:<13} {:>2} features, {} rows ({} skipped)",
            set.as_str(),
            dataset.n_features(),
            dataset.len(),
            skipped.len()
        );
    }

    // The full column list for one set, in canonical order.
    let (dataset, _) = assemble_dataset(&cohort, FeatureSetKind::All, &target_cfg);
    println!("\ncolumns of `all`:");
    for (i, name) in dataset.feature_names().iter().enumerate() {
        println!("  {i:>2}  {name}");
    }

    // Lunches that cannot be featurized are reported, not silently
    // dropped: the first workday of each phase has no prior same-phase
    // workday to compute the activity score from.
    let (_, skipped) = assemble_dataset(&cohort, FeatureSetKind::SelfGl, &target_cfg);
    if let Some(first) = skipped.first() {
        println!(
            "\nexample skip: {} at {} ({})",
            first.participant_id, first.meal_time, first.reason
        );
    }
}
