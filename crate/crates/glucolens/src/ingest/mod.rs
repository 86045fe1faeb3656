//! Parsing and validation of the four raw data sources.
//!
//! Raw inputs are delimiter-separated text files with fixed headers:
//!
//! | source        | header                                                  |
//! |---------------|---------------------------------------------------------|
//! | CGM trace     | `timestamp,glucose_mgdl`                                |
//! | activity log  | `start,duration_s,kind`                                 |
//! | food log      | `participant,date,meal_time,kind,calories,cal_fat,sat_fat_g,trans_fat_g,cholesterol_mg,sodium_mg,total_carbs_g,sugar_g,net_carbs_g,fat_g,protein_g,fiber_g` |
//! | work log      | `participant,date,work_start,work_end,wfh,pct_sit,pct_stand,pct_walk,phase` |
//!
//! All timestamps are timezone-naive local wall-clock times. Every record
//! type checks its own invariants on construction, so downstream code can
//! rely on them without re-validating.

mod parse;

pub use parse::{
    parse_activity_events, parse_cgm, parse_food_log, parse_work_log, write_activity_csv,
    write_cgm_csv, write_food_csv, write_work_csv,
};

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard physical lower bound for a CGM reading, mg/dL.
pub const GLUCOSE_MIN_MGDL: f64 = 20.0;
/// Hard physical upper bound for a CGM reading, mg/dL.
pub const GLUCOSE_MAX_MGDL: f64 = 600.0;
/// Two adjacent activity events may overlap by up to this much (device rounding).
pub const EVENT_OVERLAP_TOLERANCE_S: f64 = 1.0;
/// Slack allowed on the sitting+standing+walking percentage sum (self-report rounding).
pub const PERCENT_SUM_SLACK: f64 = 1.0;

/// Errors raised while parsing or assembling raw records.
///
/// `line` is populated when the problem was detected in a specific CSV
/// row (the header is line 1).
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}malformed row: {detail}", line_prefix(.line))]
    MalformedRow { line: Option<u64>, detail: String },
    #[error("{}glucose {value} mg/dL outside [{GLUCOSE_MIN_MGDL}, {GLUCOSE_MAX_MGDL}]", line_prefix(.line))]
    OutOfRange { line: Option<u64>, value: f64 },
    #[error("CGM stream contains no samples")]
    EmptyTrace,
    #[error("{}unknown activity kind `{kind}`", line_prefix(.line))]
    UnknownActivityKind { line: Option<u64>, kind: String },
    #[error("activity events starting {first} and {second} overlap by {overlap_s:.1} s")]
    OverlappingEvents {
        first: NaiveDateTime,
        second: NaiveDateTime,
        overlap_s: f64,
    },
    #[error("{}negative macro `{field}` = {value}", line_prefix(.line))]
    NegativeMacro {
        line: Option<u64>,
        field: &'static str,
        value: f64,
    },
    #[error("{}net carbs {net} g exceed total carbs {total} g", line_prefix(.line))]
    NetCarbExceedsTotal {
        line: Option<u64>,
        net: f64,
        total: f64,
    },
    #[error("{}calories from fat {cal_fat} exceed total calories {calories}", line_prefix(.line))]
    CaloriesFromFatExceedTotal {
        line: Option<u64>,
        cal_fat: f64,
        calories: f64,
    },
    #[error("{}sitting+standing+walking percentages sum to {sum}, above 100 + {PERCENT_SUM_SLACK}", line_prefix(.line))]
    PercentSumExceeded { line: Option<u64>, sum: f64 },
    #[error("{}percentage `{field}` = {value} outside [0, 100]", line_prefix(.line))]
    PercentOutOfRange {
        line: Option<u64>,
        field: &'static str,
        value: f64,
    },
    #[error("{}work start is not before work end", line_prefix(.line))]
    StartAfterEnd { line: Option<u64> },
    #[error("record for participant `{found}` under participant `{expected}`")]
    IdMismatch { expected: String, found: String },
    #[error("BMI {value} outside [10, 80] kg/m²")]
    BmiOutOfRange { value: f64 },
    #[error("negative event duration {value} s")]
    NegativeDuration { value: f64 },
    #[error("CGM samples not strictly increasing at {at}")]
    UnorderedSamples { at: NaiveDateTime },
    #[error("timestamp {at} has sub-minute precision")]
    SubMinuteTimestamp { at: NaiveDateTime },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn line_prefix(line: &Option<u64>) -> String {
    match line {
        Some(n) => format!("line {n}: "),
        None => String::new(),
    }
}

/// One timestamped glucose reading in mg/dL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgmSample {
    pub timestamp: NaiveDateTime,
    pub glucose: f64,
}

impl CgmSample {
    /// Build a sample, enforcing the glucose bounds and minute resolution.
    pub fn new(timestamp: NaiveDateTime, glucose: f64) -> Result<Self, IngestError> {
        if !(GLUCOSE_MIN_MGDL..=GLUCOSE_MAX_MGDL).contains(&glucose) {
            return Err(IngestError::OutOfRange {
                line: None,
                value: glucose,
            });
        }
        if timestamp.second() != 0 || timestamp.nanosecond() != 0 {
            return Err(IngestError::SubMinuteTimestamp { at: timestamp });
        }
        Ok(Self { timestamp, glucose })
    }
}

/// A participant's CGM trace: strictly increasing timestamps, nominally
/// spaced 15 minutes apart but gaps are permitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgmTrace {
    participant_id: String,
    samples: Vec<CgmSample>,
}

impl CgmTrace {
    pub fn new(participant_id: impl Into<String>, samples: Vec<CgmSample>) -> Result<Self, IngestError> {
        if samples.is_empty() {
            return Err(IngestError::EmptyTrace);
        }
        for pair in samples.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(IngestError::UnorderedSamples {
                    at: pair[1].timestamp,
                });
            }
        }
        Ok(Self {
            participant_id: participant_id.into(),
            samples,
        })
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn samples(&self) -> &[CgmSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Posture/activity classes reported by the thigh-worn event sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    Sedentary,
    Standing,
    Stepping,
    Cycling,
    PrimaryLying,
    SecondaryLying,
    SeatedTransport,
}

impl ActivityKind {
    pub const ALL: [ActivityKind; 7] = [
        ActivityKind::Sedentary,
        ActivityKind::Standing,
        ActivityKind::Stepping,
        ActivityKind::Cycling,
        ActivityKind::PrimaryLying,
        ActivityKind::SecondaryLying,
        ActivityKind::SeatedTransport,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActivityKind::Sedentary => "sedentary",
            ActivityKind::Standing => "standing",
            ActivityKind::Stepping => "stepping",
            ActivityKind::Cycling => "cycling",
            ActivityKind::PrimaryLying => "primary_lying",
            ActivityKind::SecondaryLying => "secondary_lying",
            ActivityKind::SeatedTransport => "seated_transport",
        }
    }

    /// Case-insensitive parse; spaces and hyphens are treated as underscores.
    pub fn parse(token: &str) -> Option<Self> {
        let canon: String = token
            .trim()
            .chars()
            .map(|c| match c {
                ' ' | '-' => '_',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        Self::ALL.into_iter().find(|k| k.as_str() == canon)
    }
}

impl std::fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One typed activity event with a start time and a duration in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub start: NaiveDateTime,
    pub duration_s: f64,
    pub kind: ActivityKind,
}

impl ActivityEvent {
    pub fn new(start: NaiveDateTime, duration_s: f64, kind: ActivityKind) -> Result<Self, IngestError> {
        if !duration_s.is_finite() || duration_s < 0.0 {
            return Err(IngestError::NegativeDuration { value: duration_s });
        }
        Ok(Self {
            start,
            duration_s,
            kind,
        })
    }

    pub fn end(&self) -> NaiveDateTime {
        self.start + chrono::Duration::milliseconds((self.duration_s * 1000.0).round() as i64)
    }
}

/// A participant's sorted, non-overlapping activity event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityEventLog {
    participant_id: String,
    events: Vec<ActivityEvent>,
}

impl ActivityEventLog {
    pub fn new(
        participant_id: impl Into<String>,
        mut events: Vec<ActivityEvent>,
    ) -> Result<Self, IngestError> {
        events.sort_by_key(|e| e.start);
        for pair in events.windows(2) {
            let overlap_s = (pair[0].end() - pair[1].start).num_milliseconds() as f64 / 1000.0;
            if overlap_s > EVENT_OVERLAP_TOLERANCE_S {
                return Err(IngestError::OverlappingEvents {
                    first: pair[0].start,
                    second: pair[1].start,
                    overlap_s,
                });
            }
        }
        Ok(Self {
            participant_id: participant_id.into(),
            events,
        })
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn events(&self) -> &[ActivityEvent] {
        &self.events
    }
}

/// Meal slot recorded in the food log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MealKind {
    Breakfast,
    Lunch,
    Dinner,
    Snack,
}

impl MealKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MealKind::Breakfast => "breakfast",
            MealKind::Lunch => "lunch",
            MealKind::Dinner => "dinner",
            MealKind::Snack => "snack",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "breakfast" => Some(MealKind::Breakfast),
            "lunch" => Some(MealKind::Lunch),
            "dinner" => Some(MealKind::Dinner),
            "snack" => Some(MealKind::Snack),
            _ => None,
        }
    }
}

/// Study phase a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Baseline,
    Condition1,
    Condition2,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Baseline => "baseline",
            Phase::Condition1 => "condition1",
            Phase::Condition2 => "condition2",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "baseline" => Some(Phase::Baseline),
            "condition1" => Some(Phase::Condition1),
            "condition2" => Some(Phase::Condition2),
            _ => None,
        }
    }
}

/// Macronutrient breakdown of one meal, leftovers already netted out.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacroProfile {
    pub calories: f64,
    pub calories_from_fat: f64,
    pub saturated_fat_g: f64,
    pub trans_fat_g: f64,
    pub cholesterol_mg: f64,
    pub sodium_mg: f64,
    pub total_carbs_g: f64,
    pub sugar_g: f64,
    pub net_carbs_g: f64,
    pub fat_g: f64,
    pub protein_g: f64,
    pub fiber_g: f64,
}

impl MacroProfile {
    /// Field names in food-log column order (after the meal metadata columns).
    pub const FIELDS: [&'static str; 12] = [
        "calories",
        "calories_from_fat",
        "saturated_fat_g",
        "trans_fat_g",
        "cholesterol_mg",
        "sodium_mg",
        "total_carbs_g",
        "sugar_g",
        "net_carbs_g",
        "fat_g",
        "protein_g",
        "fiber_g",
    ];

    pub fn values(&self) -> [f64; 12] {
        [
            self.calories,
            self.calories_from_fat,
            self.saturated_fat_g,
            self.trans_fat_g,
            self.cholesterol_mg,
            self.sodium_mg,
            self.total_carbs_g,
            self.sugar_g,
            self.net_carbs_g,
            self.fat_g,
            self.protein_g,
            self.fiber_g,
        ]
    }

    /// Check non-negativity, net carbs vs total carbs, and fat calories vs
    /// total calories.
    pub fn validate(&self) -> Result<(), IngestError> {
        for (field, value) in Self::FIELDS.iter().zip(self.values()) {
            if !value.is_finite() || value < 0.0 {
                return Err(IngestError::NegativeMacro {
                    line: None,
                    field,
                    value,
                });
            }
        }
        if self.net_carbs_g > self.total_carbs_g {
            return Err(IngestError::NetCarbExceedsTotal {
                line: None,
                net: self.net_carbs_g,
                total: self.total_carbs_g,
            });
        }
        if self.calories_from_fat > self.calories {
            return Err(IngestError::CaloriesFromFatExceedTotal {
                line: None,
                cal_fat: self.calories_from_fat,
                calories: self.calories,
            });
        }
        Ok(())
    }
}

/// One logged meal with its macronutrients.
///
/// `phase` is resolved during participant assembly from the same-day work
/// record; meals without one (weekends) keep `None` and are excluded from
/// modeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealRecord {
    pub participant_id: String,
    pub meal_time: NaiveDateTime,
    pub meal_kind: MealKind,
    pub macros: MacroProfile,
    pub phase: Option<Phase>,
}

impl MealRecord {
    pub fn new(
        participant_id: impl Into<String>,
        meal_time: NaiveDateTime,
        meal_kind: MealKind,
        macros: MacroProfile,
    ) -> Result<Self, IngestError> {
        macros.validate()?;
        Ok(Self {
            participant_id: participant_id.into(),
            meal_time,
            meal_kind,
            macros,
            phase: None,
        })
    }

    pub fn date(&self) -> NaiveDate {
        self.meal_time.date()
    }
}

/// One workday's self-reported schedule and posture percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkdayRecord {
    pub participant_id: String,
    pub date: NaiveDate,
    /// Minutes since midnight.
    pub work_start_min: u32,
    /// Minutes since midnight; strictly greater than `work_start_min`.
    pub work_end_min: u32,
    pub work_from_home: bool,
    pub pct_sitting: f64,
    pub pct_standing: f64,
    pub pct_walking: f64,
    pub phase: Phase,
}

impl WorkdayRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        participant_id: impl Into<String>,
        date: NaiveDate,
        work_start_min: u32,
        work_end_min: u32,
        work_from_home: bool,
        pct_sitting: f64,
        pct_standing: f64,
        pct_walking: f64,
        phase: Phase,
    ) -> Result<Self, IngestError> {
        let record = Self {
            participant_id: participant_id.into(),
            date,
            work_start_min,
            work_end_min,
            work_from_home,
            pct_sitting,
            pct_standing,
            pct_walking,
            phase,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        for (field, value) in [
            ("pct_sit", self.pct_sitting),
            ("pct_stand", self.pct_standing),
            ("pct_walk", self.pct_walking),
        ] {
            if !value.is_finite() || !(0.0..=100.0).contains(&value) {
                return Err(IngestError::PercentOutOfRange {
                    line: None,
                    field,
                    value,
                });
            }
        }
        let sum = self.pct_sitting + self.pct_standing + self.pct_walking;
        if sum > 100.0 + PERCENT_SUM_SLACK {
            return Err(IngestError::PercentSumExceeded { line: None, sum });
        }
        if self.work_start_min >= self.work_end_min {
            return Err(IngestError::StartAfterEnd { line: None });
        }
        Ok(())
    }

    pub fn work_start_time(&self) -> NaiveDateTime {
        crate::timeutil::day_start(self.date)
            + chrono::Duration::minutes(i64::from(self.work_start_min))
    }
}

/// Everything known about one participant, cross-validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantData {
    pub participant_id: String,
    /// kg/m², within [10, 80].
    pub bmi: f64,
    pub cgm: CgmTrace,
    pub activity: ActivityEventLog,
    pub meals: Vec<MealRecord>,
    pub workdays: Vec<WorkdayRecord>,
}

/// Bundle per-participant records, checking that every child shares the
/// participant id and resolving meal phases from same-day work records.
///
/// Meals on days without a work record (weekends, the between-condition
/// break) are kept but left unphased; [`ParticipantData::modelable_lunches`]
/// excludes them.
pub fn assemble_participant(
    participant_id: &str,
    bmi: f64,
    cgm: CgmTrace,
    activity: ActivityEventLog,
    mut meals: Vec<MealRecord>,
    mut workdays: Vec<WorkdayRecord>,
) -> Result<ParticipantData, IngestError> {
    if !(10.0..=80.0).contains(&bmi) {
        return Err(IngestError::BmiOutOfRange { value: bmi });
    }
    let check_id = |found: &str| -> Result<(), IngestError> {
        if found != participant_id {
            return Err(IngestError::IdMismatch {
                expected: participant_id.to_string(),
                found: found.to_string(),
            });
        }
        Ok(())
    };
    check_id(cgm.participant_id())?;
    check_id(activity.participant_id())?;
    for meal in &meals {
        check_id(&meal.participant_id)?;
    }
    for workday in &workdays {
        check_id(&workday.participant_id)?;
    }

    workdays.sort_by_key(|w| w.date);
    meals.sort_by_key(|m| m.meal_time);
    for meal in &mut meals {
        meal.phase = workdays
            .iter()
            .find(|w| w.date == meal.date())
            .map(|w| w.phase);
    }

    Ok(ParticipantData {
        participant_id: participant_id.to_string(),
        bmi,
        cgm,
        activity,
        meals,
        workdays,
    })
}

impl ParticipantData {
    /// The work record for a calendar day, if any.
    pub fn workday_on(&self, date: NaiveDate) -> Option<&WorkdayRecord> {
        self.workdays.iter().find(|w| w.date == date)
    }

    /// Lunches on days with a work record, in time order. These are the
    /// meal instances the modeling pipeline operates on.
    pub fn modelable_lunches(&self) -> Vec<&MealRecord> {
        self.meals
            .iter()
            .filter(|m| m.meal_kind == MealKind::Lunch && self.workday_on(m.date()).is_some())
            .collect()
    }

    /// Meals flagged at assembly because no same-day work record exists.
    pub fn flagged_meals(&self) -> Vec<&MealRecord> {
        self.meals
            .iter()
            .filter(|m| self.workday_on(m.date()).is_none())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn dt(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M").unwrap()
    }

    fn sample(s: &str, g: f64) -> CgmSample {
        CgmSample::new(dt(s), g).unwrap()
    }

    fn small_trace(id: &str) -> CgmTrace {
        CgmTrace::new(
            id,
            vec![
                sample("2024-03-04 08:00", 95.0),
                sample("2024-03-04 08:15", 97.0),
            ],
        )
        .unwrap()
    }

    fn empty_log(id: &str) -> ActivityEventLog {
        ActivityEventLog::new(
            id,
            vec![ActivityEvent::new(dt("2024-03-04 08:00"), 3600.0, ActivityKind::Sedentary).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn glucose_bounds_enforced() {
        assert!(CgmSample::new(dt("2024-03-04 08:00"), 900.0).is_err());
        assert!(CgmSample::new(dt("2024-03-04 08:00"), 10.0).is_err());
        assert!(CgmSample::new(dt("2024-03-04 08:00"), 20.0).is_ok());
        assert!(CgmSample::new(dt("2024-03-04 08:00"), 600.0).is_ok());
    }

    #[test]
    fn trace_requires_strict_ordering() {
        let err = CgmTrace::new(
            "P1",
            vec![
                sample("2024-03-04 08:15", 95.0),
                sample("2024-03-04 08:00", 97.0),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::UnorderedSamples { .. }));
    }

    #[test]
    fn activity_kind_parsing_is_forgiving() {
        assert_eq!(ActivityKind::parse("Sedentary"), Some(ActivityKind::Sedentary));
        assert_eq!(
            ActivityKind::parse("primary lying"),
            Some(ActivityKind::PrimaryLying)
        );
        assert_eq!(
            ActivityKind::parse("SEATED_TRANSPORT"),
            Some(ActivityKind::SeatedTransport)
        );
        assert_eq!(ActivityKind::parse("jumping"), None);
    }

    #[test]
    fn overlapping_events_rejected_beyond_tolerance() {
        let a = ActivityEvent::new(dt("2024-03-04 08:00"), 1200.0, ActivityKind::Sedentary).unwrap();
        let b = ActivityEvent::new(dt("2024-03-04 08:10"), 600.0, ActivityKind::Standing).unwrap();
        let err = ActivityEventLog::new("P1", vec![a, b]).unwrap_err();
        assert!(matches!(err, IngestError::OverlappingEvents { .. }));

        // 1 s of overlap is within the tolerance.
        let c = ActivityEvent::new(dt("2024-03-04 08:00"), 601.0, ActivityKind::Sedentary).unwrap();
        let d = ActivityEvent::new(dt("2024-03-04 08:10"), 600.0, ActivityKind::Standing).unwrap();
        assert!(ActivityEventLog::new("P1", vec![c, d]).is_ok());
    }

    #[test]
    fn macro_invariants() {
        let mut m = MacroProfile {
            calories: 780.0,
            total_carbs_g: 60.0,
            net_carbs_g: 50.0,
            fiber_g: 1.0,
            ..Default::default()
        };
        assert!(m.validate().is_ok());

        m.net_carbs_g = 70.0;
        assert!(matches!(
            m.validate(),
            Err(IngestError::NetCarbExceedsTotal { .. })
        ));

        m.net_carbs_g = 50.0;
        m.fat_g = -1.0;
        assert!(matches!(m.validate(), Err(IngestError::NegativeMacro { .. })));
    }

    #[test]
    fn workday_invariants() {
        let date = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();
        assert!(WorkdayRecord::new("P1", date, 540, 1020, false, 60.0, 30.0, 10.0, Phase::Baseline).is_ok());
        assert!(matches!(
            WorkdayRecord::new("P1", date, 540, 1020, false, 50.0, 40.0, 30.0, Phase::Baseline),
            Err(IngestError::PercentSumExceeded { .. })
        ));
        assert!(matches!(
            WorkdayRecord::new("P1", date, 1080, 540, false, 50.0, 30.0, 10.0, Phase::Baseline),
            Err(IngestError::StartAfterEnd { .. })
        ));
    }

    #[test]
    fn assemble_checks_ids_and_bmi() {
        let meal = MealRecord::new(
            "P2",
            dt("2024-03-04 12:30"),
            MealKind::Lunch,
            MacroProfile::default(),
        )
        .unwrap();
        let err = assemble_participant(
            "P1",
            32.8,
            small_trace("P1"),
            empty_log("P1"),
            vec![meal],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::IdMismatch { .. }));

        let err = assemble_participant("P1", 9.0, small_trace("P1"), empty_log("P1"), vec![], vec![])
            .unwrap_err();
        assert!(matches!(err, IngestError::BmiOutOfRange { .. }));

        // BMI matching the cohort average is accepted.
        assert!(
            assemble_participant("P1", 32.8, small_trace("P1"), empty_log("P1"), vec![], vec![])
                .is_ok()
        );
    }

    #[test]
    fn assemble_resolves_phases_and_flags_weekends() {
        let monday = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();
        let workday =
            WorkdayRecord::new("P1", monday, 540, 1020, false, 60.0, 30.0, 10.0, Phase::Condition1)
                .unwrap();
        let weekday_lunch = MealRecord::new(
            "P1",
            dt("2024-03-04 12:30"),
            MealKind::Lunch,
            MacroProfile::default(),
        )
        .unwrap();
        let weekend_lunch = MealRecord::new(
            "P1",
            dt("2024-03-09 12:30"),
            MealKind::Lunch,
            MacroProfile::default(),
        )
        .unwrap();

        let participant = assemble_participant(
            "P1",
            30.0,
            small_trace("P1"),
            empty_log("P1"),
            vec![weekend_lunch, weekday_lunch],
            vec![workday],
        )
        .unwrap();

        assert_eq!(participant.meals[0].phase, Some(Phase::Condition1));
        assert_eq!(participant.meals[1].phase, None);
        assert_eq!(participant.modelable_lunches().len(), 1);
        assert_eq!(participant.flagged_meals().len(), 1);
    }
}
