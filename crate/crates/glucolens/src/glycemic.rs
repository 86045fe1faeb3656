//! Postprandial glycemic targets from a CGM trace.
//!
//! The trace is treated as a piecewise-linear glucose function; AUC is its
//! trapezoidal integral over a postprandial window, iAUC the integral of
//! the part above a baseline (negative excursions clipped, with crossings
//! split exactly), and MaxBGL the maximum over in-window samples plus the
//! interpolated window boundaries. Units are mg/dL and minutes throughout.

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::CgmTrace;
use crate::timeutil::minutes_between;

/// Default postprandial window length, minutes.
pub const DEFAULT_WINDOW_MIN: f64 = 180.0;
/// Default largest tolerated gap between samples inside a window, minutes.
pub const DEFAULT_MAX_GAP_MIN: f64 = 60.0;
/// Default hyperglycemia threshold, mg/dL.
pub const DEFAULT_HYPER_THRESHOLD: f64 = 140.0;

#[derive(Debug, Error, PartialEq)]
pub enum GlycemicError {
    #[error("window duration {duration_min} min outside [30, 360]")]
    WindowOutOfRange { duration_min: f64 },
    #[error("trace does not cover the window")]
    InsufficientData,
    #[error("gap of {gap_min:.1} min inside the window exceeds the {max_gap_min:.1} min limit")]
    GapTooLarge { gap_min: f64, max_gap_min: f64 },
    #[error("baseline {baseline} mg/dL is not positive")]
    NonPositiveBaseline { baseline: f64 },
    #[error("no samples between 06:00 and 10:00 on {date}")]
    NoMorningSamples { date: NaiveDate },
    #[error("no samples between 00:00 and 08:00 on {date}")]
    NoOvernightSamples { date: NaiveDate },
}

/// The analysis window starting at a meal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprandialWindow {
    pub start: NaiveDateTime,
    pub duration_min: f64,
}

impl PostprandialWindow {
    pub fn new(start: NaiveDateTime, duration_min: f64) -> Result<Self, GlycemicError> {
        if !duration_min.is_finite() || !(30.0..=360.0).contains(&duration_min) {
            return Err(GlycemicError::WindowOutOfRange { duration_min });
        }
        Ok(Self { start, duration_min })
    }

    pub fn end(&self) -> NaiveDateTime {
        crate::timeutil::add_minutes(self.start, self.duration_min)
    }
}

/// Whether the hyperglycemia label looks at the whole window or the
/// single two-hour mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperglycemiaPolicy {
    /// Maximum glucose anywhere in the window (default).
    #[default]
    MaxInWindow,
    /// Interpolated glucose exactly two hours after the meal.
    AtTwoHours,
}

/// Settings for target computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetConfig {
    pub window_min: f64,
    pub max_gap_min: f64,
    pub hyper_threshold: f64,
    pub hyper_policy: HyperglycemiaPolicy,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            window_min: DEFAULT_WINDOW_MIN,
            max_gap_min: DEFAULT_MAX_GAP_MIN,
            hyper_threshold: DEFAULT_HYPER_THRESHOLD,
            hyper_policy: HyperglycemiaPolicy::MaxInWindow,
        }
    }
}

/// The per-meal outcome values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlycemicTargets {
    /// mg/dL·min over the window.
    pub auc: f64,
    /// mg/dL·min above the pre-meal baseline, clipped at zero.
    pub iauc: f64,
    /// mg/dL.
    pub max_bgl: f64,
    pub hyperglycemic: bool,
}

/// The piecewise-linear glucose function restricted to one window.
///
/// Knot times are minutes relative to the window start; the first knot is
/// always 0 and the last the window duration, with boundary values
/// interpolated from straddling samples when needed.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSeries {
    times_min: Vec<f64>,
    values: Vec<f64>,
}

impl WindowSeries {
    pub fn times_min(&self) -> &[f64] {
        &self.times_min
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn duration_min(&self) -> f64 {
        *self.times_min.last().expect("series is never empty")
    }

    /// Linear interpolation at `t` minutes past the window start.
    pub fn value_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration_min());
        match self.times_min.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => self.values[i],
            Err(i) => {
                let (t0, t1) = (self.times_min[i - 1], self.times_min[i]);
                let (v0, v1) = (self.values[i - 1], self.values[i]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Trapezoidal integral over the window, mg/dL·min.
    pub fn integral(&self) -> f64 {
        let mut total = 0.0;
        for i in 1..self.times_min.len() {
            let dt = self.times_min[i] - self.times_min[i - 1];
            total += 0.5 * (self.values[i] + self.values[i - 1]) * dt;
        }
        total
    }

    /// Integral of `max(value - baseline, 0)`, splitting segments exactly
    /// where they cross the baseline.
    pub fn integral_above(&self, baseline: f64) -> f64 {
        let mut total = 0.0;
        for i in 1..self.times_min.len() {
            let dt = self.times_min[i] - self.times_min[i - 1];
            let a = self.values[i - 1] - baseline;
            let b = self.values[i] - baseline;
            total += clipped_trapezoid(a, b, dt);
        }
        total
    }

    /// Maximum of the function over the window (attained at a knot).
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Area of the part of a trapezoid with ends `a`, `b` over width `dt`
/// that lies above zero.
fn clipped_trapezoid(a: f64, b: f64, dt: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        0.5 * (a + b) * dt
    } else if a <= 0.0 && b <= 0.0 {
        0.0
    } else {
        // One end above, one below: the positive part is a triangle.
        let positive = a.max(b);
        let negative = a.min(b);
        let width_above = dt * positive / (positive - negative);
        0.5 * positive * width_above
    }
}

/// Restrict a trace to a window as a piecewise-linear function.
///
/// The trace must straddle (or touch) both window boundaries, and no
/// inter-sample gap overlapping the open window may exceed `max_gap_min`.
pub fn resample_window(
    trace: &CgmTrace,
    window: &PostprandialWindow,
    max_gap_min: f64,
) -> Result<WindowSeries, GlycemicError> {
    let duration = window.duration_min;
    let rel: Vec<(f64, f64)> = trace
        .samples()
        .iter()
        .map(|s| (minutes_between(window.start, s.timestamp), s.glucose))
        .collect();

    let first_in = rel
        .iter()
        .rposition(|&(t, _)| t <= 0.0)
        .ok_or(GlycemicError::InsufficientData)?;
    let last_in = rel
        .iter()
        .position(|&(t, _)| t >= duration)
        .ok_or(GlycemicError::InsufficientData)?;

    for i in first_in..last_in {
        let (t0, _) = rel[i];
        let (t1, _) = rel[i + 1];
        // Only gaps that overlap the open window invalidate it.
        if t1 > 0.0 && t0 < duration {
            let gap = t1 - t0;
            if gap > max_gap_min {
                return Err(GlycemicError::GapTooLarge {
                    gap_min: gap,
                    max_gap_min,
                });
            }
        }
    }

    let interp = |i: usize, at: f64| -> f64 {
        let (t0, v0) = rel[i];
        let (t1, v1) = rel[i + 1];
        v0 + (v1 - v0) * (at - t0) / (t1 - t0)
    };

    let mut times_min = Vec::new();
    let mut values = Vec::new();
    if rel[first_in].0 == 0.0 {
        times_min.push(0.0);
        values.push(rel[first_in].1);
    } else {
        times_min.push(0.0);
        values.push(interp(first_in, 0.0));
    }
    for &(t, v) in &rel[first_in + 1..last_in] {
        if t > 0.0 && t < duration {
            times_min.push(t);
            values.push(v);
        }
    }
    if rel[last_in].0 == duration {
        times_min.push(duration);
        values.push(rel[last_in].1);
    } else {
        times_min.push(duration);
        values.push(interp(last_in - 1, duration));
    }

    Ok(WindowSeries { times_min, values })
}

/// Trapezoidal area under the glucose curve over the window, mg/dL·min.
pub fn compute_auc(trace: &CgmTrace, window: &PostprandialWindow) -> Result<f64, GlycemicError> {
    Ok(resample_window(trace, window, DEFAULT_MAX_GAP_MIN)?.integral())
}

/// Incremental area above `baseline` over the window, clipped at zero.
pub fn compute_iauc(
    trace: &CgmTrace,
    window: &PostprandialWindow,
    baseline: f64,
) -> Result<f64, GlycemicError> {
    if !(baseline > 0.0) {
        return Err(GlycemicError::NonPositiveBaseline { baseline });
    }
    Ok(resample_window(trace, window, DEFAULT_MAX_GAP_MIN)?.integral_above(baseline))
}

/// Maximum glucose over in-window samples plus interpolated boundary
/// values when straddling samples exist.
pub fn compute_max_bgl(trace: &CgmTrace, window: &PostprandialWindow) -> Result<f64, GlycemicError> {
    let duration = window.duration_min;
    let rel: Vec<(f64, f64)> = trace
        .samples()
        .iter()
        .map(|s| (minutes_between(window.start, s.timestamp), s.glucose))
        .collect();

    let mut best = f64::NEG_INFINITY;
    for &(t, v) in &rel {
        if (0.0..=duration).contains(&t) {
            best = best.max(v);
        }
    }
    for boundary in [0.0, duration] {
        let before = rel.iter().rposition(|&(t, _)| t <= boundary);
        let after = rel.iter().position(|&(t, _)| t >= boundary);
        if let (Some(i), Some(j)) = (before, after) {
            if i != j {
                let (t0, v0) = rel[i];
                let (t1, v1) = rel[j];
                best = best.max(v0 + (v1 - v0) * (boundary - t0) / (t1 - t0));
            }
        }
    }

    if best.is_finite() {
        Ok(best)
    } else {
        Err(GlycemicError::InsufficientData)
    }
}

/// Minimum CGM reading between 06:00 and 10:00 on `date` (no interpolation).
pub fn fasting_glucose(trace: &CgmTrace, date: NaiveDate) -> Result<f64, GlycemicError> {
    window_samples(trace, date, 6, 10)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
        .ok_or(GlycemicError::NoMorningSamples { date })
}

/// Mean CGM reading between 00:00 and 08:00 on `date`.
pub fn recent_cgm(trace: &CgmTrace, date: NaiveDate) -> Result<f64, GlycemicError> {
    let (sum, count) = window_samples(trace, date, 0, 8).fold((0.0, 0u32), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        return Err(GlycemicError::NoOvernightSamples { date });
    }
    Ok(sum / f64::from(count))
}

fn window_samples(
    trace: &CgmTrace,
    date: NaiveDate,
    start_hour: u32,
    end_hour: u32,
) -> impl Iterator<Item = f64> + '_ {
    let lo = date.and_hms_opt(start_hour, 0, 0).expect("valid time");
    let hi = date.and_hms_opt(end_hour, 0, 0).expect("valid time");
    trace
        .samples()
        .iter()
        .filter(move |s| s.timestamp >= lo && s.timestamp <= hi)
        .map(|s| s.glucose)
}

/// True iff `max_bgl` reaches the threshold.
pub fn label_hyperglycemia(targets: &GlycemicTargets, threshold: f64) -> bool {
    targets.max_bgl >= threshold
}

/// Compute all targets for a meal: AUC, iAUC above the interpolated
/// pre-meal value, MaxBGL, and the hyperglycemia label per the configured
/// policy.
pub fn compute_targets(
    trace: &CgmTrace,
    meal_time: NaiveDateTime,
    cfg: &TargetConfig,
) -> Result<GlycemicTargets, GlycemicError> {
    let window = PostprandialWindow::new(meal_time, cfg.window_min)?;
    let series = resample_window(trace, &window, cfg.max_gap_min)?;

    let auc = series.integral();
    let baseline = series.value_at(0.0);
    if !(baseline > 0.0) {
        return Err(GlycemicError::NonPositiveBaseline { baseline });
    }
    let iauc = series.integral_above(baseline);
    let max_bgl = series.max();
    let hyperglycemic = match cfg.hyper_policy {
        HyperglycemiaPolicy::MaxInWindow => max_bgl >= cfg.hyper_threshold,
        HyperglycemiaPolicy::AtTwoHours => {
            series.value_at(120.0_f64.min(cfg.window_min)) >= cfg.hyper_threshold
        }
    };

    Ok(GlycemicTargets {
        auc,
        iauc,
        max_bgl,
        hyperglycemic,
    })
}
