//! Naive local-time helpers.
//!
//! All timestamps in the pipeline are timezone-naive wall-clock times;
//! arithmetic is plain minute arithmetic with no DST adjustments.

use chrono::{NaiveDate, NaiveDateTime, Timelike};

/// Minutes since midnight of the timestamp's own day.
pub(crate) fn minutes_of_day(t: NaiveDateTime) -> f64 {
    f64::from(t.time().num_seconds_from_midnight()) / 60.0
}

/// Minutes elapsed from `a` to `b` (negative when `b` is earlier).
pub(crate) fn minutes_between(a: NaiveDateTime, b: NaiveDateTime) -> f64 {
    (b - a).num_seconds() as f64 / 60.0
}

/// The timestamp `minutes` after `t`, rounded to whole seconds.
pub(crate) fn add_minutes(t: NaiveDateTime, minutes: f64) -> NaiveDateTime {
    t + chrono::Duration::seconds((minutes * 60.0).round() as i64)
}

/// Midnight at the start of `date`.
pub(crate) fn day_start(date: NaiveDate) -> NaiveDateTime {
    date.and_hms_opt(0, 0, 0).expect("midnight is always valid")
}
