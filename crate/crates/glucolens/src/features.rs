//! Per-lunch feature assembly: the five fixed feature sets, glycemic load,
//! self-reported activity score, sensor-derived activity durations, the
//! tabular dataset container with CSV import/export, and z-score scaling.
//!
//! Feature order is canonical and fixed: the fifteen common features, then
//! (when present) the six sensor durations, the activity score, the
//! glycemic load, and the four raw macronutrients.

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glycemic::{self, GlycemicTargets, TargetConfig};
use crate::ingest::{ActivityEventLog, ActivityKind, MealKind, MealRecord, ParticipantData, WorkdayRecord};
use crate::timeutil::{day_start, minutes_between, minutes_of_day};

/// Features shared by every feature set, in canonical order.
pub const COMMON_FEATURES: [&str; 15] = [
    "fasting_glucose",
    "recent_cgm",
    "lunch_time",
    "work_from_home",
    "bmi",
    "calories",
    "calories_from_fat",
    "saturated_fat",
    "trans_fat",
    "cholesterol",
    "sodium",
    "total_carbs",
    "sugar",
    "work_start_time",
    "day_of_week",
];

/// Sensor-derived activity durations, in canonical order.
pub const SENSOR_FEATURES: [&str; 6] = [
    "prev_day_sit",
    "prev_day_stand",
    "prev_day_step",
    "work_sit",
    "work_stand",
    "work_step",
];

/// Self-reported activity score feature name.
pub const SELF_FEATURE: &str = "activity_score";

/// Glycemic load feature name.
pub const GL_FEATURE: &str = "glycemic_load";

/// Raw macronutrients used by the Macro sets, in canonical order.
pub const MACRO_FEATURES: [&str; 4] = ["net_carbs", "fat", "protein", "fiber"];

/// Target columns appended after the features in exported CSVs.
pub const TARGET_COLUMNS: [&str; 4] = ["auc", "iauc", "max_bgl", "hyper"];

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("no prior same-phase workdays to average")]
    NoPriorDays,
    #[error("activity event log is empty")]
    EmptyLog,
    #[error("meal at {meal_time} is not a lunch")]
    NotALunch { meal_time: NaiveDateTime },
    #[error("cannot compute feature: {feature}")]
    MissingUpstreamFeature { feature: String },
    #[error("need at least 2 rows, got {rows}")]
    TooFewRows { rows: usize },
    #[error("rows come from different feature sets")]
    HeterogeneousSets,
    #[error("expected {expected} values, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("unrecognized CSV header: {found}")]
    HeaderMismatch { found: String },
    #[error("line {line}: {detail}")]
    MalformedRow { line: usize, detail: String },
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FeatureError {
    fn from(e: std::io::Error) -> Self {
        FeatureError::Io(e.to_string())
    }
}

/// The five fixed feature sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSetKind {
    SensorGl,
    SensorMacro,
    SelfGl,
    SelfMacro,
    All,
}

impl FeatureSetKind {
    pub const ALL_KINDS: [FeatureSetKind; 5] = [
        FeatureSetKind::SensorGl,
        FeatureSetKind::SensorMacro,
        FeatureSetKind::SelfGl,
        FeatureSetKind::SelfMacro,
        FeatureSetKind::All,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureSetKind::SensorGl => "sensor-gl",
            FeatureSetKind::SensorMacro => "sensor-macro",
            FeatureSetKind::SelfGl => "self-gl",
            FeatureSetKind::SelfMacro => "self-macro",
            FeatureSetKind::All => "all",
        }
    }

    /// Parse a set name; case-insensitive, `-` and `_` interchangeable.
    pub fn parse(token: &str) -> Option<Self> {
        let norm: String = token
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "sensorgl" => Some(FeatureSetKind::SensorGl),
            "sensormacro" => Some(FeatureSetKind::SensorMacro),
            "selfgl" => Some(FeatureSetKind::SelfGl),
            "selfmacro" => Some(FeatureSetKind::SelfMacro),
            "all" => Some(FeatureSetKind::All),
            _ => None,
        }
    }

    fn has_sensor(&self) -> bool {
        matches!(
            self,
            FeatureSetKind::SensorGl | FeatureSetKind::SensorMacro | FeatureSetKind::All
        )
    }

    fn has_self_score(&self) -> bool {
        matches!(
            self,
            FeatureSetKind::SelfGl | FeatureSetKind::SelfMacro | FeatureSetKind::All
        )
    }

    fn has_gl(&self) -> bool {
        matches!(
            self,
            FeatureSetKind::SensorGl | FeatureSetKind::SelfGl | FeatureSetKind::All
        )
    }

    fn has_macros(&self) -> bool {
        matches!(
            self,
            FeatureSetKind::SensorMacro | FeatureSetKind::SelfMacro | FeatureSetKind::All
        )
    }

    /// The canonical, ordered feature-name list for this set.
    pub fn feature_names(&self) -> Vec<&'static str> {
        let mut names: Vec<&'static str> = COMMON_FEATURES.to_vec();
        if self.has_sensor() {
            names.extend(SENSOR_FEATURES);
        }
        if self.has_self_score() {
            names.push(SELF_FEATURE);
        }
        if self.has_gl() {
            names.push(GL_FEATURE);
        }
        if self.has_macros() {
            names.extend(MACRO_FEATURES);
        }
        names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names().len()
    }
}

impl std::fmt::Display for FeatureSetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One assembled feature vector in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub set_kind: FeatureSetKind,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(set_kind: FeatureSetKind, values: Vec<f64>) -> Result<Self, FeatureError> {
        let expected = set_kind.n_features();
        if values.len() != expected {
            return Err(FeatureError::ShapeMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self { set_kind, values })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.set_kind.feature_names()
    }

    /// Value of a feature by canonical name.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names()
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }
}

/// Glycemic load of a meal from its macronutrients.
///
/// GL = 19.27 + 0.39·net_carbs − 0.21·fat − 0.01·protein² − 0.01·fiber².
/// The value is passed through unchanged even when negative.
pub fn glycemic_load(macros: &crate::ingest::MacroProfile) -> f64 {
    19.27 + 0.39 * macros.net_carbs_g
        - 0.21 * macros.fat_g
        - 0.01 * macros.protein_g * macros.protein_g
        - 0.01 * macros.fiber_g * macros.fiber_g
}

/// Self-reported activity score over prior same-phase workdays:
/// mean walking percentage plus half the mean standing percentage.
pub fn activity_score(prior_workdays: &[WorkdayRecord]) -> Result<f64, FeatureError> {
    if prior_workdays.is_empty() {
        return Err(FeatureError::NoPriorDays);
    }
    let n = prior_workdays.len() as f64;
    let mean_walk: f64 = prior_workdays.iter().map(|w| w.pct_walking).sum::<f64>() / n;
    let mean_stand: f64 = prior_workdays.iter().map(|w| w.pct_standing).sum::<f64>() / n;
    Ok(mean_walk + 0.5 * mean_stand)
}

/// Which interval feeds the `prev_day_*` buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayToLunchPolicy {
    /// The previous calendar day, midnight to midnight (default).
    #[default]
    PreviousCalendarDay,
    /// The lunch day itself, midnight up to the lunch.
    MidnightToLunch,
}

/// Minutes of sitting, standing, and stepping over the day-before-lunch
/// interval and the work-start-to-lunch interval.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivityDurations {
    pub prev_day_sit: f64,
    pub prev_day_stand: f64,
    pub prev_day_step: f64,
    pub work_sit: f64,
    pub work_stand: f64,
    pub work_step: f64,
}

impl ActivityDurations {
    /// Values in canonical feature order.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.prev_day_sit,
            self.prev_day_stand,
            self.prev_day_step,
            self.work_sit,
            self.work_stand,
            self.work_step,
        ]
    }
}

/// Sum event minutes overlapping `[lo, hi)`, bucketed into
/// (sit, stand, step); straddling events count pro-rata.
fn bucket_overlap(
    log: &ActivityEventLog,
    lo: NaiveDateTime,
    hi: NaiveDateTime,
) -> (f64, f64, f64) {
    let mut sit = 0.0;
    let mut stand = 0.0;
    let mut step = 0.0;
    for event in log.events() {
        let start = event.start.max(lo);
        let end = event.end().min(hi);
        let minutes = minutes_between(start, end).max(0.0);
        if minutes <= 0.0 {
            continue;
        }
        match event.kind {
            ActivityKind::Sedentary | ActivityKind::SeatedTransport => sit += minutes,
            ActivityKind::Standing => stand += minutes,
            ActivityKind::Stepping => step += minutes,
            _ => {}
        }
    }
    (sit, stand, step)
}

/// Sensor activity durations with the default day-to-lunch policy.
pub fn activity_durations(
    log: &ActivityEventLog,
    lunch_time: NaiveDateTime,
    work_start: NaiveDateTime,
) -> Result<ActivityDurations, FeatureError> {
    activity_durations_with(log, lunch_time, work_start, DayToLunchPolicy::default())
}

/// Sensor activity durations, choosing which interval feeds the
/// `prev_day_*` buckets.
pub fn activity_durations_with(
    log: &ActivityEventLog,
    lunch_time: NaiveDateTime,
    work_start: NaiveDateTime,
    policy: DayToLunchPolicy,
) -> Result<ActivityDurations, FeatureError> {
    if log.events().is_empty() {
        return Err(FeatureError::EmptyLog);
    }

    let today = day_start(lunch_time.date());
    let (prev_lo, prev_hi) = match policy {
        DayToLunchPolicy::PreviousCalendarDay => {
            (today - chrono::Duration::days(1), today)
        }
        DayToLunchPolicy::MidnightToLunch => (today, lunch_time),
    };
    let (prev_day_sit, prev_day_stand, prev_day_step) = bucket_overlap(log, prev_lo, prev_hi);
    let (work_sit, work_stand, work_step) = bucket_overlap(log, work_start, lunch_time);

    Ok(ActivityDurations {
        prev_day_sit,
        prev_day_stand,
        prev_day_step,
        work_sit,
        work_stand,
        work_step,
    })
}

/// Build the feature vector for one lunch.
///
/// Inputs a set needs but cannot compute surface as
/// [`FeatureError::MissingUpstreamFeature`] naming the feature; inputs
/// other sets would need are not touched.
pub fn assemble_features(
    participant: &ParticipantData,
    meal: &MealRecord,
    set_kind: FeatureSetKind,
) -> Result<FeatureVector, FeatureError> {
    if meal.meal_kind != MealKind::Lunch {
        return Err(FeatureError::NotALunch {
            meal_time: meal.meal_time,
        });
    }
    let date = meal.date();
    let workday = participant
        .workday_on(date)
        .ok_or_else(|| FeatureError::MissingUpstreamFeature {
            feature: "work start time".into(),
        })?;

    let fasting = glycemic::fasting_glucose(&participant.cgm, date).map_err(|_| {
        FeatureError::MissingUpstreamFeature {
            feature: "fasting glucose".into(),
        }
    })?;
    let recent = glycemic::recent_cgm(&participant.cgm, date).map_err(|_| {
        FeatureError::MissingUpstreamFeature {
            feature: "recent CGM".into(),
        }
    })?;

    let durations = if set_kind.has_sensor() {
        Some(
            activity_durations(&participant.activity, meal.meal_time, workday.work_start_time())
                .map_err(|_| FeatureError::MissingUpstreamFeature {
                    feature: "activity durations".into(),
                })?,
        )
    } else {
        None
    };

    let score = if set_kind.has_self_score() {
        let prior: Vec<WorkdayRecord> = participant
            .workdays
            .iter()
            .filter(|w| w.phase == workday.phase && w.date < date)
            .cloned()
            .collect();
        Some(
            activity_score(&prior).map_err(|_| FeatureError::MissingUpstreamFeature {
                feature: "activity score".into(),
            })?,
        )
    } else {
        None
    };

    let m = &meal.macros;
    let mut values = Vec::with_capacity(set_kind.n_features());
    for name in set_kind.feature_names() {
        let v = match name {
            "fasting_glucose" => fasting,
            "recent_cgm" => recent,
            "lunch_time" => minutes_of_day(meal.meal_time),
            "work_from_home" => f64::from(u8::from(workday.work_from_home)),
            "bmi" => participant.bmi,
            "calories" => m.calories,
            "calories_from_fat" => m.calories_from_fat,
            "saturated_fat" => m.saturated_fat_g,
            "trans_fat" => m.trans_fat_g,
            "cholesterol" => m.cholesterol_mg,
            "sodium" => m.sodium_mg,
            "total_carbs" => m.total_carbs_g,
            "sugar" => m.sugar_g,
            "work_start_time" => f64::from(workday.work_start_min),
            "day_of_week" => f64::from(date.weekday().num_days_from_monday()),
            "prev_day_sit" => durations.expect("sensor set").prev_day_sit,
            "prev_day_stand" => durations.expect("sensor set").prev_day_stand,
            "prev_day_step" => durations.expect("sensor set").prev_day_step,
            "work_sit" => durations.expect("sensor set").work_sit,
            "work_stand" => durations.expect("sensor set").work_stand,
            "work_step" => durations.expect("sensor set").work_step,
            "activity_score" => score.expect("self set"),
            "glycemic_load" => glycemic_load(m),
            "net_carbs" => m.net_carbs_g,
            "fat" => m.fat_g,
            "protein" => m.protein_g,
            "fiber" => m.fiber_g,
            other => unreachable!("unknown canonical feature {other}"),
        };
        values.push(v);
    }

    FeatureVector::new(set_kind, values)
}

/// A lunch left out of a dataset and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedMeal {
    pub participant_id: String,
    pub meal_time: NaiveDateTime,
    pub reason: String,
}

/// A feature matrix with aligned targets; the working currency of the
/// resampling, model, and evaluation layers.
///
/// `synthetic` marks rows produced by augmentation or oversampling rather
/// than observed; exports omit the flag (files hold only real rows unless
/// explicitly written otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    set_kind: FeatureSetKind,
    feature_names: Vec<String>,
    features: Vec<Vec<f64>>,
    targets: Vec<GlycemicTargets>,
    synthetic: Vec<bool>,
}

/// Which regression target a model trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Auc,
    Iauc,
    MaxBgl,
}

impl TargetKind {
    pub const ALL: [TargetKind; 3] = [TargetKind::Auc, TargetKind::Iauc, TargetKind::MaxBgl];

    pub fn as_str(&self) -> &'static str {
        match self {
            TargetKind::Auc => "auc",
            TargetKind::Iauc => "iauc",
            TargetKind::MaxBgl => "max_bgl",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().replace('-', "_").as_str() {
            "auc" => Some(TargetKind::Auc),
            "iauc" => Some(TargetKind::Iauc),
            "max_bgl" | "maxbgl" => Some(TargetKind::MaxBgl),
            _ => None,
        }
    }

    pub fn of(&self, t: &GlycemicTargets) -> f64 {
        match self {
            TargetKind::Auc => t.auc,
            TargetKind::Iauc => t.iauc,
            TargetKind::MaxBgl => t.max_bgl,
        }
    }
}

impl std::fmt::Display for TargetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Dataset {
    pub fn new(set_kind: FeatureSetKind) -> Self {
        Self {
            set_kind,
            feature_names: set_kind.feature_names().iter().map(|s| s.to_string()).collect(),
            features: Vec::new(),
            targets: Vec::new(),
            synthetic: Vec::new(),
        }
    }

    pub fn set_kind(&self) -> FeatureSetKind {
        self.set_kind
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &[GlycemicTargets] {
        &self.targets
    }

    pub fn synthetic(&self) -> &[bool] {
        &self.synthetic
    }

    pub fn n_synthetic(&self) -> usize {
        self.synthetic.iter().filter(|&&s| s).count()
    }

    pub fn push_row(
        &mut self,
        values: Vec<f64>,
        targets: GlycemicTargets,
        synthetic: bool,
    ) -> Result<(), FeatureError> {
        if values.len() != self.n_features() {
            return Err(FeatureError::ShapeMismatch {
                expected: self.n_features(),
                found: values.len(),
            });
        }
        self.features.push(values);
        self.targets.push(targets);
        self.synthetic.push(synthetic);
        Ok(())
    }

    /// A new dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            set_kind: self.set_kind,
            feature_names: self.feature_names.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            synthetic: indices.iter().map(|&i| self.synthetic[i]).collect(),
        }
    }

    /// The chosen regression target as a column vector.
    pub fn target_column(&self, kind: TargetKind) -> Vec<f64> {
        self.targets.iter().map(|t| kind.of(t)).collect()
    }

    /// Hyperglycemia labels as a boolean column.
    pub fn labels(&self) -> Vec<bool> {
        self.targets.iter().map(|t| t.hyperglycemic).collect()
    }

    /// Append one extra feature column (e.g. a model prediction) to every
    /// row. The name must be new and `values` one per row.
    pub fn append_feature_column(
        &mut self,
        name: impl Into<String>,
        values: &[f64],
    ) -> Result<(), FeatureError> {
        let name = name.into();
        if self.feature_names.iter().any(|n| *n == name) {
            return Err(FeatureError::MalformedRow {
                line: 0,
                detail: format!("duplicate feature column {name}"),
            });
        }
        if values.len() != self.len() {
            return Err(FeatureError::ShapeMismatch {
                expected: self.len(),
                found: values.len(),
            });
        }
        self.feature_names.push(name);
        for (row, &v) in self.features.iter_mut().zip(values) {
            row.push(v);
        }
        Ok(())
    }

    /// Write as CSV: canonical feature names, any extra columns, then
    /// `auc,iauc,max_bgl,hyper` (hyper as 0/1).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<&str> = self
            .feature_names
            .iter()
            .map(String::as_str)
            .chain(TARGET_COLUMNS)
            .collect();
        w.write_record(&header)
            .map_err(|e| FeatureError::Io(e.to_string()))?;
        for (row, t) in self.features.iter().zip(&self.targets) {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(t.auc.to_string());
            record.push(t.iauc.to_string());
            record.push(t.max_bgl.to_string());
            record.push(if t.hyperglycemic { "1" } else { "0" }.to_string());
            w.write_record(&record)
                .map_err(|e| FeatureError::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a CSV written by [`Dataset::write_csv`]. The header must start
    /// with the canonical names of one feature set and end with the target
    /// columns; extra feature columns in between are preserved.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, FeatureError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let mut records = reader.records();

        let header = match records.next() {
            Some(Ok(rec)) => rec,
            Some(Err(e)) => return Err(FeatureError::Io(e.to_string())),
            None => {
                return Err(FeatureError::HeaderMismatch {
                    found: "<empty file>".into(),
                })
            }
        };
        let columns: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        let header_err = || FeatureError::HeaderMismatch {
            found: columns.join(","),
        };

        if columns.len() < TARGET_COLUMNS.len() + 1 {
            return Err(header_err());
        }
        let n_feat = columns.len() - TARGET_COLUMNS.len();
        if columns[n_feat..] != TARGET_COLUMNS {
            return Err(header_err());
        }
        let set_kind = FeatureSetKind::ALL_KINDS
            .iter()
            .copied()
            .find(|k| {
                let names = k.feature_names();
                n_feat >= names.len()
                    && columns[..names.len()].iter().map(String::as_str).eq(names)
            })
            .ok_or_else(header_err)?;

        let mut dataset = Dataset {
            set_kind,
            feature_names: columns[..n_feat].to_vec(),
            features: Vec::new(),
            targets: Vec::new(),
            synthetic: Vec::new(),
        };

        for result in records {
            let record = result.map_err(|e| FeatureError::Io(e.to_string()))?;
            let line = record
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(0);
            if record.iter().all(|f| f.trim().is_empty()) {
                continue;
            }
            if record.len() != columns.len() {
                return Err(FeatureError::MalformedRow {
                    line,
                    detail: format!("expected {} fields, got {}", columns.len(), record.len()),
                });
            }
            let num = |idx: usize| -> Result<f64, FeatureError> {
                record[idx].trim().parse::<f64>().map_err(|_| {
                    FeatureError::MalformedRow {
                        line,
                        detail: format!("bad number {:?} in column {}", &record[idx], columns[idx]),
                    }
                })
            };
            let values: Vec<f64> = (0..n_feat).map(num).collect::<Result<_, _>>()?;
            let hyper_raw = record[n_feat + 3].trim();
            let hyperglycemic = match hyper_raw {
                "1" | "true" => true,
                "0" | "false" => false,
                other => {
                    return Err(FeatureError::MalformedRow {
                        line,
                        detail: format!("bad label {other:?} in column hyper"),
                    })
                }
            };
            let targets = GlycemicTargets {
                auc: num(n_feat)?,
                iauc: num(n_feat + 1)?,
                max_bgl: num(n_feat + 2)?,
                hyperglycemic,
            };
            dataset.features.push(values);
            dataset.targets.push(targets);
            dataset.synthetic.push(false);
        }
        Ok(dataset)
    }
}

/// Build a dataset of every modelable lunch across participants,
/// recording skipped lunches and the reason for each.
pub fn assemble_dataset(
    participants: &[ParticipantData],
    set_kind: FeatureSetKind,
    target_cfg: &TargetConfig,
) -> (Dataset, Vec<SkippedMeal>) {
    let mut dataset = Dataset::new(set_kind);
    let mut skipped = Vec::new();
    for participant in participants {
        for meal in participant.modelable_lunches() {
            let skip = |reason: String| SkippedMeal {
                participant_id: participant.participant_id.clone(),
                meal_time: meal.meal_time,
                reason,
            };
            let targets = match glycemic::compute_targets(&participant.cgm, meal.meal_time, target_cfg)
            {
                Ok(t) => t,
                Err(e) => {
                    skipped.push(skip(e.to_string()));
                    continue;
                }
            };
            match assemble_features(participant, meal, set_kind) {
                Ok(vector) => dataset
                    .push_row(vector.values, targets, false)
                    .expect("assembled vector matches set width"),
                Err(e) => skipped.push(skip(e.to_string())),
            }
        }
    }
    (dataset, skipped)
}

/// Per-feature z-score scaler fit on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl Scaler {
    /// Fit on rows (population standard deviation); zero-variance
    /// features get sd := 1 so they scale to a constant zero.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        if rows.len() < 2 {
            return Err(FeatureError::TooFewRows { rows: rows.len() });
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(FeatureError::HeterogeneousSets);
        }
        let n = rows.len() as f64;
        let mut means = vec![0.0; width];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut sds = vec![0.0; width];
        for row in rows {
            for ((s, v), m) in sds.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut sds {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Ok(Self { means, sds })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.means.len() {
            return Err(FeatureError::ShapeMismatch {
                expected: self.means.len(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn inverse_row(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.means.len() {
            return Err(FeatureError::ShapeMismatch {
                expected: self.means.len(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((v, m), s)| v * s + m)
            .collect())
    }

    /// Scale every row of a dataset; targets and flags pass through.
    pub fn transform_dataset(&self, dataset: &Dataset) -> Result<Dataset, FeatureError> {
        let mut out = dataset.clone();
        for row in &mut out.features {
            *row = self.transform_row(row)?;
        }
        Ok(out)
    }
}

/// Fit a scaler on the dataset and return the scaled copy alongside it.
pub fn standardize(dataset: &Dataset) -> Result<(Scaler, Dataset), FeatureError> {
    let scaler = Scaler::fit(dataset.features())?;
    let scaled = scaler.transform_dataset(dataset)?;
    Ok((scaler, scaled))
}

/// Fit a scaler over loose feature vectors, which must all come from the
/// same feature set.
pub fn standardize_vectors(
    rows: &[FeatureVector],
) -> Result<(Scaler, Vec<FeatureVector>), FeatureError> {
    if rows.len() < 2 {
        return Err(FeatureError::TooFewRows { rows: rows.len() });
    }
    let set_kind = rows[0].set_kind;
    if rows.iter().any(|r| r.set_kind != set_kind) {
        return Err(FeatureError::HeterogeneousSets);
    }
    let values: Vec<Vec<f64>> = rows.iter().map(|r| r.values.clone()).collect();
    let scaler = Scaler::fit(&values)?;
    let scaled = values
        .into_iter()
        .map(|v| {
            Ok(FeatureVector {
                set_kind,
                values: scaler.transform_row(&v)?,
            })
        })
        .collect::<Result<Vec<_>, FeatureError>>()?;
    Ok((scaler, scaled))
}

/// Count rows per feature name — a debugging aid for skipped-meal
/// reports: maps each missing-feature reason to its frequency.
pub fn skip_reasons(skipped: &[SkippedMeal]) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for s in skipped {
        *counts.entry(s.reason.clone()).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{
        assemble_participant, ActivityEvent, CgmSample, CgmTrace, MacroProfile, Phase,
    };
    use chrono::{NaiveDate, NaiveDateTime};
    use proptest::prelude::*;

    fn dt(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M").unwrap()
    }

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn golden_feature_name_lists() {
        let common = [
            "fasting_glucose",
            "recent_cgm",
            "lunch_time",
            "work_from_home",
            "bmi",
            "calories",
            "calories_from_fat",
            "saturated_fat",
            "trans_fat",
            "cholesterol",
            "sodium",
            "total_carbs",
            "sugar",
            "work_start_time",
            "day_of_week",
        ];
        let sensor = [
            "prev_day_sit",
            "prev_day_stand",
            "prev_day_step",
            "work_sit",
            "work_stand",
            "work_step",
        ];
        let macros = ["net_carbs", "fat", "protein", "fiber"];

        let mut sensor_gl: Vec<&str> = common.to_vec();
        sensor_gl.extend(sensor);
        sensor_gl.push("glycemic_load");
        assert_eq!(FeatureSetKind::SensorGl.feature_names(), sensor_gl);

        let mut sensor_macro: Vec<&str> = common.to_vec();
        sensor_macro.extend(sensor);
        sensor_macro.extend(macros);
        assert_eq!(FeatureSetKind::SensorMacro.feature_names(), sensor_macro);

        let mut self_gl: Vec<&str> = common.to_vec();
        self_gl.push("activity_score");
        self_gl.push("glycemic_load");
        assert_eq!(FeatureSetKind::SelfGl.feature_names(), self_gl);

        let mut self_macro: Vec<&str> = common.to_vec();
        self_macro.push("activity_score");
        self_macro.extend(macros);
        assert_eq!(FeatureSetKind::SelfMacro.feature_names(), self_macro);

        let mut all: Vec<&str> = common.to_vec();
        all.extend(sensor);
        all.push("activity_score");
        all.push("glycemic_load");
        all.extend(macros);
        assert_eq!(FeatureSetKind::All.feature_names(), all);

        assert_eq!(FeatureSetKind::SensorGl.n_features(), 22);
        assert_eq!(FeatureSetKind::SensorMacro.n_features(), 25);
        assert_eq!(FeatureSetKind::SelfGl.n_features(), 17);
        assert_eq!(FeatureSetKind::SelfMacro.n_features(), 20);
        assert_eq!(FeatureSetKind::All.n_features(), 27);
    }

    #[test]
    fn all_set_is_superset_of_every_other() {
        let all = FeatureSetKind::All.feature_names();
        for kind in FeatureSetKind::ALL_KINDS {
            for name in kind.feature_names() {
                assert!(all.contains(&name), "{name} missing from All");
            }
        }
    }

    #[test]
    fn set_kind_parsing() {
        assert_eq!(FeatureSetKind::parse("sensor-gl"), Some(FeatureSetKind::SensorGl));
        assert_eq!(FeatureSetKind::parse("Sensor_Macro"), Some(FeatureSetKind::SensorMacro));
        assert_eq!(FeatureSetKind::parse("SelfGL"), Some(FeatureSetKind::SelfGl));
        assert_eq!(FeatureSetKind::parse("ALL"), Some(FeatureSetKind::All));
        assert_eq!(FeatureSetKind::parse("bogus"), None);
    }

    fn macros_with(net_carbs: f64, fat: f64, protein: f64, fiber: f64) -> MacroProfile {
        MacroProfile {
            calories: 0.0,
            calories_from_fat: 0.0,
            saturated_fat_g: 0.0,
            trans_fat_g: 0.0,
            cholesterol_mg: 0.0,
            sodium_mg: 0.0,
            total_carbs_g: net_carbs.max(1000.0),
            sugar_g: 0.0,
            net_carbs_g: net_carbs,
            fat_g: fat,
            protein_g: protein,
            fiber_g: fiber,
        }
    }

    #[test]
    fn glycemic_load_known_values() {
        assert!((glycemic_load(&macros_with(0.0, 0.0, 0.0, 0.0)) - 19.27).abs() < 1e-12);
        assert!((glycemic_load(&macros_with(50.0, 10.0, 20.0, 5.0)) - 32.42).abs() < 1e-12);
        assert!((glycemic_load(&macros_with(100.0, 0.0, 0.0, 0.0)) - 58.27).abs() < 1e-12);
    }

    #[test]
    fn glycemic_load_is_quadratic_in_protein() {
        // Second central difference of a quadratic is exact: −0.02·h².
        for p in [0.0, 10.0, 37.5, 80.0] {
            for h in [0.5, 1.0, 4.0] {
                let f = |protein: f64| glycemic_load(&macros_with(30.0, 10.0, protein, 3.0));
                let second = f(p + h) - 2.0 * f(p) + f(p - h);
                assert!((second - (-0.02 * h * h)).abs() < 1e-9);
            }
        }
    }

    fn workday(day: &str, walk: f64, stand: f64, phase: Phase) -> WorkdayRecord {
        let sit = 100.0 - walk - stand;
        WorkdayRecord::new("P1", date(day), 9 * 60, 17 * 60, false, sit, stand, walk, phase)
            .unwrap()
    }

    #[test]
    fn activity_score_rules() {
        let prior = vec![
            workday("2024-03-04", 10.0, 30.0, Phase::Condition1),
            workday("2024-03-05", 20.0, 50.0, Phase::Condition1),
        ];
        assert!((activity_score(&prior).unwrap() - 35.0).abs() < 1e-12);

        let zero = vec![workday("2024-03-04", 0.0, 0.0, Phase::Baseline)];
        assert_eq!(activity_score(&zero).unwrap(), 0.0);

        assert_eq!(activity_score(&[]), Err(FeatureError::NoPriorDays));
    }

    fn event(start: &str, minutes: f64, kind: ActivityKind) -> ActivityEvent {
        ActivityEvent::new(dt(start), minutes * 60.0, kind).unwrap()
    }

    #[test]
    fn activity_durations_buckets_and_prorating() {
        let events = vec![
            // Previous day: 2h sedentary, 1h standing, 30 min stepping, 1h cycling.
            event("2024-03-04 10:00", 120.0, ActivityKind::Sedentary),
            event("2024-03-04 13:00", 60.0, ActivityKind::Standing),
            event("2024-03-04 15:00", 30.0, ActivityKind::Stepping),
            event("2024-03-04 16:00", 60.0, ActivityKind::Cycling),
            // Lunch day: sedentary straddling the 09:00 work start by half.
            event("2024-03-05 08:30", 60.0, ActivityKind::Sedentary),
            event("2024-03-05 10:00", 30.0, ActivityKind::Stepping),
            event("2024-03-05 11:00", 45.0, ActivityKind::SeatedTransport),
        ];
        let log = ActivityEventLog::new("P1", events).unwrap();
        let d = activity_durations(&log, dt("2024-03-05 12:30"), dt("2024-03-05 09:00")).unwrap();

        assert_eq!(d.prev_day_sit, 120.0);
        assert_eq!(d.prev_day_stand, 60.0);
        assert_eq!(d.prev_day_step, 30.0);
        assert_eq!(d.work_sit, 30.0 + 45.0, "straddling event counts pro-rata");
        assert_eq!(d.work_stand, 0.0);
        assert_eq!(d.work_step, 30.0);
    }

    #[test]
    fn day_to_lunch_policy_changes_prev_day_window() {
        let events = vec![
            event("2024-03-04 10:00", 60.0, ActivityKind::Stepping),
            event("2024-03-05 07:00", 20.0, ActivityKind::Stepping),
        ];
        let log = ActivityEventLog::new("P1", events).unwrap();
        let lunch = dt("2024-03-05 12:30");
        let work = dt("2024-03-05 09:00");

        let prev = activity_durations_with(&log, lunch, work, DayToLunchPolicy::PreviousCalendarDay)
            .unwrap();
        assert_eq!(prev.prev_day_step, 60.0);

        let same = activity_durations_with(&log, lunch, work, DayToLunchPolicy::MidnightToLunch)
            .unwrap();
        assert_eq!(same.prev_day_step, 20.0);
    }

    #[test]
    fn empty_log_rejected() {
        let log = ActivityEventLog::new("P1", vec![]).unwrap();
        assert_eq!(
            activity_durations(&log, dt("2024-03-05 12:30"), dt("2024-03-05 09:00")),
            Err(FeatureError::EmptyLog)
        );
    }

    /// A participant with two workdays (Mon 2024-03-04, Tue 2024-03-05),
    /// CGM covering both mornings and lunch windows, activity both days,
    /// and a lunch on Tuesday.
    fn test_participant() -> ParticipantData {
        let start = dt("2024-03-04 00:00");
        let samples: Vec<CgmSample> = (0..(2 * 24 * 4))
            .map(|i| {
                let t = start + chrono::Duration::minutes(15 * i);
                CgmSample::new(t, 100.0 + 10.0 * ((i % 7) as f64)).unwrap()
            })
            .collect();
        let cgm = CgmTrace::new("P1", samples).unwrap();
        let activity = ActivityEventLog::new(
            "P1",
            vec![
                event("2024-03-04 09:00", 300.0, ActivityKind::Sedentary),
                event("2024-03-04 14:00", 60.0, ActivityKind::Standing),
                event("2024-03-04 15:00", 45.0, ActivityKind::Stepping),
                event("2024-03-05 09:00", 120.0, ActivityKind::Sedentary),
                event("2024-03-05 11:00", 30.0, ActivityKind::Stepping),
            ],
        )
        .unwrap();
        let meals = vec![MealRecord::new(
            "P1",
            dt("2024-03-05 12:30"),
            MealKind::Lunch,
            MacroProfile {
                calories: 700.0,
                calories_from_fat: 210.0,
                saturated_fat_g: 8.0,
                trans_fat_g: 0.5,
                cholesterol_mg: 60.0,
                sodium_mg: 900.0,
                total_carbs_g: 80.0,
                sugar_g: 15.0,
                net_carbs_g: 70.0,
                fat_g: 23.0,
                protein_g: 30.0,
                fiber_g: 10.0,
            },
        )
        .unwrap()];
        let workdays = vec![
            WorkdayRecord::new("P1", date("2024-03-04"), 9 * 60, 17 * 60, false, 70.0, 20.0, 10.0, Phase::Condition1).unwrap(),
            WorkdayRecord::new("P1", date("2024-03-05"), 9 * 60 + 30, 17 * 60, true, 65.0, 22.0, 13.0, Phase::Condition1).unwrap(),
        ];
        assemble_participant("P1", 31.5, cgm, activity, meals, workdays).unwrap()
    }

    #[test]
    fn assemble_features_encodings_and_order() {
        let participant = test_participant();
        let meal = &participant.meals[0];

        let v = assemble_features(&participant, meal, FeatureSetKind::All).unwrap();
        assert_eq!(v.values.len(), 27);
        assert_eq!(v.get("lunch_time"), Some(750.0), "12:30 in minutes");
        assert_eq!(v.get("work_from_home"), Some(1.0));
        assert_eq!(v.get("work_start_time"), Some(570.0), "09:30 in minutes");
        assert_eq!(v.get("day_of_week"), Some(1.0), "Tuesday");
        assert_eq!(v.get("bmi"), Some(31.5));
        assert_eq!(v.get("net_carbs"), Some(70.0));
        assert_eq!(v.get("prev_day_step"), Some(45.0));
        assert_eq!(v.get("work_step"), Some(30.0));
        // One prior same-phase workday (Mon): 10 + 0.5·20.
        assert_eq!(v.get("activity_score"), Some(20.0));
        let gl = v.get("glycemic_load").unwrap();
        assert!((gl - glycemic_load(&meal.macros)).abs() < 1e-12);

        // Sensor+GL: no macros, no activity score.
        let v = assemble_features(&participant, meal, FeatureSetKind::SensorGl).unwrap();
        assert_eq!(v.values.len(), 22);
        assert_eq!(v.get("net_carbs"), None);
        assert_eq!(v.get("activity_score"), None);
        assert!(v.get("glycemic_load").is_some());
        assert!(v.get("work_sit").is_some());
    }

    #[test]
    fn assemble_features_is_deterministic() {
        let participant = test_participant();
        let meal = &participant.meals[0];
        let a = assemble_features(&participant, meal, FeatureSetKind::All).unwrap();
        let b = assemble_features(&participant, meal, FeatureSetKind::All).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn missing_inputs_are_named() {
        let mut participant = test_participant();
        let meal = participant.meals[0].clone();

        // Drop the lunch-day workday: no work start time.
        participant.workdays.retain(|w| w.date != date("2024-03-05"));
        match assemble_features(&participant, &meal, FeatureSetKind::All) {
            Err(FeatureError::MissingUpstreamFeature { feature }) => {
                assert_eq!(feature, "work start time")
            }
            other => panic!("expected MissingUpstreamFeature, got {other:?}"),
        }

        // Self sets need a prior same-phase workday.
        let mut participant = test_participant();
        participant.workdays.retain(|w| w.date != date("2024-03-04"));
        match assemble_features(&participant, &meal, FeatureSetKind::SelfGl) {
            Err(FeatureError::MissingUpstreamFeature { feature }) => {
                assert_eq!(feature, "activity score")
            }
            other => panic!("expected MissingUpstreamFeature, got {other:?}"),
        }
        // ... but sensor sets do not.
        assert!(assemble_features(&participant, &meal, FeatureSetKind::SensorGl).is_ok());
    }

    #[test]
    fn non_lunch_meal_rejected() {
        let participant = test_participant();
        let mut meal = participant.meals[0].clone();
        meal.meal_kind = MealKind::Dinner;
        assert!(matches!(
            assemble_features(&participant, &meal, FeatureSetKind::All),
            Err(FeatureError::NotALunch { .. })
        ));
    }

    #[test]
    fn assemble_dataset_builds_rows_and_reports_skips() {
        let participant = test_participant();
        let (dataset, skipped) =
            assemble_dataset(&[participant], FeatureSetKind::All, &TargetConfig::default());
        assert_eq!(dataset.len(), 1);
        assert!(skipped.is_empty(), "skips: {skipped:?}");
        assert_eq!(dataset.n_features(), 27);
        assert!(dataset.targets()[0].auc > 0.0);
    }

    #[test]
    fn scaler_known_column_and_constant_column() {
        let rows = vec![vec![1.0, 7.0], vec![3.0, 7.0]];
        let scaler = Scaler::fit(&rows).unwrap();
        assert_eq!(scaler.transform_row(&rows[0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(scaler.transform_row(&rows[1]).unwrap(), vec![1.0, 0.0]);
        // Inverse recovers originals exactly here.
        let back = scaler.inverse_row(&[-1.0, 0.0]).unwrap();
        assert_eq!(back, vec![1.0, 7.0]);
    }

    #[test]
    fn scaler_shape_errors() {
        assert_eq!(
            Scaler::fit(&[vec![1.0]]).unwrap_err(),
            FeatureError::TooFewRows { rows: 1 }
        );
        assert_eq!(
            Scaler::fit(&[vec![1.0], vec![1.0, 2.0]]).unwrap_err(),
            FeatureError::HeterogeneousSets
        );
    }

    #[test]
    fn standardize_vectors_rejects_mixed_sets() {
        let a = FeatureVector::new(FeatureSetKind::SelfGl, vec![0.0; 17]).unwrap();
        let b = FeatureVector::new(FeatureSetKind::All, vec![0.0; 27]).unwrap();
        assert_eq!(
            standardize_vectors(&[a, b]).unwrap_err(),
            FeatureError::HeterogeneousSets
        );
    }

    #[test]
    fn dataset_csv_round_trip_is_exact() {
        let participant = test_participant();
        let (dataset, _) =
            assemble_dataset(&[participant], FeatureSetKind::SelfMacro, &TargetConfig::default());

        let mut buf = Vec::new();
        dataset.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("fasting_glucose,recent_cgm,"));
        assert!(header.ends_with("net_carbs,fat,protein,fiber,auc,iauc,max_bgl,hyper"));

        let back = Dataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back.set_kind(), FeatureSetKind::SelfMacro);
        assert_eq!(back.len(), dataset.len());
        for (a, b) in back.features().iter().zip(dataset.features()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits(), "float round-trip must be exact");
            }
        }
        assert_eq!(back.targets(), dataset.targets());
    }

    #[test]
    fn dataset_csv_rejects_unknown_header() {
        let text = "a,b,c,auc,iauc,max_bgl,hyper\n1,2,3,4,5,6,0\n";
        assert!(matches!(
            Dataset::read_csv(text.as_bytes()),
            Err(FeatureError::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn dataset_extra_column_round_trip() {
        let participant = test_participant();
        let (mut dataset, _) =
            assemble_dataset(&[participant], FeatureSetKind::All, &TargetConfig::default());
        dataset.append_feature_column("llm_claude_opus4", &[12345.0]).unwrap();
        assert_eq!(dataset.n_features(), 28);

        let mut buf = Vec::new();
        dataset.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back.set_kind(), FeatureSetKind::All);
        assert_eq!(back.feature_names().last().map(String::as_str), Some("llm_claude_opus4"));
        assert_eq!(back.features()[0][27], 12345.0);
    }

    proptest! {
        #[test]
        fn scaler_round_trip_recovers_values(
            rows in prop::collection::vec(prop::collection::vec(-1000.0..1000.0f64, 4), 2..30)
        ) {
            let scaler = Scaler::fit(&rows).unwrap();
            for row in &rows {
                let scaled = scaler.transform_row(row).unwrap();
                let back = scaler.inverse_row(&scaled).unwrap();
                for (orig, rec) in row.iter().zip(&back) {
                    prop_assert!((orig - rec).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn scaled_columns_have_zero_mean_unit_sd(
            rows in prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 3), 3..40)
        ) {
            let scaler = Scaler::fit(&rows).unwrap();
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| scaler.transform_row(r).unwrap()).collect();
            let n = scaled.len() as f64;
            for j in 0..3 {
                let mean: f64 = scaled.iter().map(|r| r[j]).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                let var: f64 = scaled.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                // Either unit variance or a constant column scaled to zeros.
                prop_assert!((var - 1.0).abs() < 1e-6 || var < 1e-18);
            }
        }

        #[test]
        fn durations_partition_bounded_by_interval(
            starts in prop::collection::vec(0i64..1380, 1..20),
            durs in prop::collection::vec(1i64..90, 20),
        ) {
            // Build non-overlapping events on the lunch day by sorting and
            // clamping each start to the previous end.
            let base = dt("2024-03-05 00:00");
            let mut sorted = starts.clone();
            sorted.sort_unstable();
            let mut events = Vec::new();
            let mut cursor = 0i64;
            for (i, &s) in sorted.iter().enumerate() {
                let start = s.max(cursor);
                let dur = durs[i % durs.len()];
                if start + dur > 24 * 60 {
                    break;
                }
                let kind = match i % 4 {
                    0 => ActivityKind::Sedentary,
                    1 => ActivityKind::Standing,
                    2 => ActivityKind::Stepping,
                    _ => ActivityKind::Cycling,
                };
                events.push(
                    ActivityEvent::new(base + chrono::Duration::minutes(start), (dur * 60) as f64, kind)
                        .unwrap(),
                );
                cursor = start + dur;
            }
            prop_assume!(!events.is_empty());
            let log = ActivityEventLog::new("P1", events).unwrap();

            let work_start = dt("2024-03-05 09:00");
            let lunch = dt("2024-03-05 12:30");
            let d = activity_durations_with(&log, lunch, work_start, DayToLunchPolicy::MidnightToLunch).unwrap();

            let work_len = 210.0;
            let day_len = 750.0;
            prop_assert!(d.work_sit + d.work_stand + d.work_step <= work_len + 1e-9);
            prop_assert!(d.prev_day_sit + d.prev_day_stand + d.prev_day_step <= day_len + 1e-9);
            for v in d.as_array() {
                prop_assert!(v >= 0.0);
            }
        }
    }
}
