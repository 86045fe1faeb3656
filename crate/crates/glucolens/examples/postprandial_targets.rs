//! Compute the three postprandial targets and the meal's glycemic load.
//!
//! A lunch is scored over a configurable window (180 minutes by default)
//! starting at meal time: AUC by trapezoidal integration of the CGM trace,
//! incremental AUC as the area above the interpolated pre-meal baseline
//! with negative excursions clipped, and the maximum glucose including the
//! interpolated window boundaries. The hyperglycemia label compares the
//! window maximum against 140 mg/dL.
//!
//! Run with: cargo run --example postprandial_targets

use chrono::NaiveDate;
use glucolens::features::glycemic_load;
use glucolens::glycemic::{compute_targets, fasting_glucose, recent_cgm, TargetConfig};
use glucolens::ingest::{CgmSample, CgmTrace, MacroProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let day = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();

    // A 15-minute trace covering the night, the morning, and a lunch
    // excursion that peaks between two samples.
    let mut samples = Vec::new();
    for slot in 0..96 {
        let minute = slot * 15;
        let t = day.and_hms_opt(0, 0, 0).unwrap() + chrono::Duration::minutes(minute);
        let glucose = match minute {
            750..=839 => 95.0 + (minute - 750) as f64,   // rising after lunch
            840..=929 => 185.0 - (minute - 840) as f64,  // falling back
            _ => 95.0,
        };
        samples.push(CgmSample::new(t, glucose)?);
    }
    let trace = CgmTrace::new("p-01", samples)?;

    let lunch = day.and_hms_opt(12, 30, 0).unwrap();
    let config = TargetConfig::default();
    let targets = compute_targets(&trace, lunch, &config)?;
    println!("window: {} min from {lunch}", config.window_min);
    println!("  AUC      {:>10.1} mg/dL-min", targets.auc);
    println!("  iAUC     {:>10.1} mg/dL-min", targets.iauc);
    println!("  MaxBGL   {:>10.1} mg/dL", targets.max_bgl);
    println!("  hyper    {:>10}", targets.hyperglycemic);

    // Day-level CGM summaries used as features.
    println!("fasting glucose (min 06:00-10:00): {}", fasting_glucose(&trace, day)?);
    println!("recent CGM (mean 00:00-08:00):     {}", recent_cgm(&trace, day)?);

    // The meal-level glycemic load score depends only on the macros.
    let macros = MacroProfile {
        calories: 680.0,
        calories_from_fat: 210.0,
        saturated_fat_g: 8.0,
        trans_fat_g: 0.0,
        cholesterol_mg: 55.0,
        sodium_mg: 820.0,
        total_carbs_g: 60.0,
        sugar_g: 22.0,
        net_carbs_g: 50.0,
        fat_g: 10.0,
        protein_g: 20.0,
        fiber_g: 5.0,
    };
    println!("glycemic load of the meal:         {:.2}", glycemic_load(&macros));

    // A shorter window changes the targets but not the contract.
    let short = TargetConfig {
        window_min: 120.0,
        ..TargetConfig::default()
    };
    let targets_2h = compute_targets(&trace, lunch, &short)?;
    println!(
        "over 120 min instead: AUC {:.1}, MaxBGL {:.1}",
        targets_2h.auc, targets_2h.max_bgl
    );
    Ok(())
}
