//! Parse the four raw data sources and assemble a participant bundle.
//!
//! Each source is a small CSV with a fixed header: the CGM trace and the
//! activity event log are per-participant files, while the food and work
//! logs are shared streams keyed by participant id. Parsing validates
//! every record (glucose bounds, event overlap, macro consistency, posture
//! percentages), and assembly sorts everything, deduplicates CGM samples,
//! and resolves each meal's study phase from the same-day work record.
//!
//! Run with: cargo run --example ingest_raw_logs

use glucolens::ingest::{
    assemble_participant, parse_activity_events, parse_cgm, parse_food_log, parse_work_log,
};

const CGM: &str = "\
timestamp,glucose_mgdl
2024-03-04 07:45,96
2024-03-04 08:00,95
2024-03-04 08:15,102
2024-03-04 08:30,118
2024-03-04 08:45,131
2024-03-04 09:00,125
2024-03-04 09:15,111
2024-03-04 09:30,104
";

const ACTIVITY: &str = "\
start,duration_s,kind
2024-03-04 07:30:00,1800,sedentary
2024-03-04 08:00:00,600,stepping
2024-03-04 08:10:00,1200,standing
2024-03-04 08:30:00,3600,sedentary
";

const FOOD: &str = "\
participant,date,meal_time,kind,calories,cal_fat,sat_fat_g,trans_fat_g,\
cholesterol_mg,sodium_mg,total_carbs_g,sugar_g,net_carbs_g,fat_g,protein_g,fiber_g
p-01,2024-03-04,08:00,breakfast,420,90,3,0,25,300,62,18,56,10,14,6
p-01,2024-03-04,12:30,lunch,680,210,8,0,55,820,75,22,68,23,28,7
";

const WORK: &str = "\
participant,date,work_start,work_end,wfh,pct_sit,pct_stand,pct_walk,phase
p-01,2024-03-04,08:30,17:00,false,70,20,10,baseline
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cgm = parse_cgm(CGM.as_bytes(), "p-01")?;
    let activity = parse_activity_events(ACTIVITY.as_bytes(), "p-01")?;
    let meals = parse_food_log(FOOD.as_bytes())?;
    let workdays = parse_work_log(WORK.as_bytes())?;

    println!(
        "parsed {} CGM samples, {} activity events, {} meals, {} workdays",
        cgm.len(),
        activity.events().len(),
        meals.len(),
        workdays.len()
    );

    let participant = assemble_participant("p-01", 31.4, cgm, activity, meals, workdays)?;
    println!(
        "assembled {} (BMI {}): span {} -> {}",
        participant.participant_id,
        participant.bmi,
        participant.cgm.samples().first().unwrap().timestamp,
        participant.cgm.samples().last().unwrap().timestamp,
    );
    for meal in &participant.meals {
        println!(
            "  {} {} at {} ({} kcal, phase {:?})",
            meal.participant_id,
            meal.meal_kind.as_str(),
            meal.meal_time,
            meal.macros.calories,
            meal.phase.map(|p| p.as_str()),
        );
    }

    // Validation is not optional: a glucose reading outside the physical
    // range is rejected at parse time with the offending line.
    let bad = "timestamp,glucose_mgdl\n2024-03-04 08:00,900\n";
    let err = parse_cgm(bad.as_bytes(), "p-02").unwrap_err();
    println!("rejected out-of-range trace: {err}");
    Ok(())
}
