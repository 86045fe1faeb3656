//! CSV readers and writers for the four raw sources.
//!
//! Readers validate the header bit-exactly, report row problems with
//! their line number, and return records that already satisfy the type
//! invariants. Writers emit the same canonical form the readers accept,
//! so parse → write → parse is the identity on valid data.

use std::collections::HashSet;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Timelike};

use super::{
    ActivityEvent, ActivityEventLog, ActivityKind, CgmSample, CgmTrace, IngestError, MacroProfile,
    MealKind, MealRecord, Phase, WorkdayRecord,
};

pub(crate) const CGM_HEADER: &str = "timestamp,glucose_mgdl";
pub(crate) const ACTIVITY_HEADER: &str = "start,duration_s,kind";
pub(crate) const FOOD_HEADER: &str = "participant,date,meal_time,kind,calories,cal_fat,sat_fat_g,\
trans_fat_g,cholesterol_mg,sodium_mg,total_carbs_g,sugar_g,net_carbs_g,fat_g,protein_g,fiber_g";
pub(crate) const WORK_HEADER: &str =
    "participant,date,work_start,work_end,wfh,pct_sit,pct_stand,pct_walk,phase";

/// A parsed CSV row: its 1-based line number and raw fields.
struct Row {
    line: u64,
    fields: Vec<String>,
}

fn read_rows(stream: impl Read, expected_header: &str) -> Result<Vec<Row>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(stream);

    let expected: Vec<&str> = expected_header.split(',').collect();
    let mut rows = Vec::new();
    let mut saw_header = false;

    for result in reader.records() {
        let record = result.map_err(|e| IngestError::MalformedRow {
            line: None,
            detail: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<String> = record.iter().map(str::to_string).collect();

        if !saw_header {
            if fields != expected {
                return Err(IngestError::MalformedRow {
                    line: Some(line),
                    detail: format!(
                        "expected header `{expected_header}`, found `{}`",
                        fields.join(",")
                    ),
                });
            }
            saw_header = true;
            continue;
        }

        if fields.len() == 1 && fields[0].is_empty() {
            continue; // blank line
        }
        if fields.len() != expected.len() {
            return Err(IngestError::MalformedRow {
                line: Some(line),
                detail: format!("expected {} fields, found {}", expected.len(), fields.len()),
            });
        }
        rows.push(Row { line, fields });
    }

    if !saw_header {
        return Err(IngestError::MalformedRow {
            line: None,
            detail: format!("empty stream, expected header `{expected_header}`"),
        });
    }
    Ok(rows)
}

const DATETIME_FORMATS: [&str; 4] = [
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
];

fn parse_datetime(s: &str, line: u64) -> Result<NaiveDateTime, IngestError> {
    DATETIME_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s.trim(), fmt).ok())
        .ok_or_else(|| IngestError::MalformedRow {
            line: Some(line),
            detail: format!("unparseable timestamp `{s}`"),
        })
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| IngestError::MalformedRow {
        line: Some(line),
        detail: format!("unparseable date `{s}`"),
    })
}

fn parse_f64(s: &str, field: &str, line: u64) -> Result<f64, IngestError> {
    s.trim().parse::<f64>().map_err(|_| IngestError::MalformedRow {
        line: Some(line),
        detail: format!("unparseable number `{s}` in field `{field}`"),
    })
}

/// Parse `HH:MM` into minutes since midnight.
fn parse_hhmm(s: &str, field: &str, line: u64) -> Result<u32, IngestError> {
    let t = NaiveTime::parse_from_str(s.trim(), "%H:%M").map_err(|_| IngestError::MalformedRow {
        line: Some(line),
        detail: format!("unparseable time `{s}` in field `{field}` (expected HH:MM)"),
    })?;
    Ok(t.num_seconds_from_midnight() / 60)
}

fn parse_bool(s: &str, field: &str, line: u64) -> Result<bool, IngestError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(IngestError::MalformedRow {
            line: Some(line),
            detail: format!("unparseable boolean `{s}` in field `{field}`"),
        }),
    }
}

/// Parse a CGM stream (`timestamp,glucose_mgdl`).
///
/// Rows may arrive in any order; the returned trace is sorted ascending.
/// When the stream repeats a timestamp, the first occurrence wins.
pub fn parse_cgm(stream: impl Read, participant_id: &str) -> Result<CgmTrace, IngestError> {
    let rows = read_rows(stream, CGM_HEADER)?;

    let mut seen = HashSet::new();
    let mut samples = Vec::with_capacity(rows.len());
    for row in &rows {
        let timestamp = parse_datetime(&row.fields[0], row.line)?;
        let glucose = parse_f64(&row.fields[1], "glucose_mgdl", row.line)?;
        let sample = CgmSample::new(timestamp, glucose).map_err(|e| match e {
            IngestError::OutOfRange { value, .. } => IngestError::OutOfRange {
                line: Some(row.line),
                value,
            },
            IngestError::SubMinuteTimestamp { at } => IngestError::MalformedRow {
                line: Some(row.line),
                detail: format!("timestamp {at} has sub-minute precision"),
            },
            other => other,
        })?;
        if seen.insert(sample.timestamp) {
            samples.push(sample);
        }
    }
    samples.sort_by_key(|s| s.timestamp);
    CgmTrace::new(participant_id, samples)
}

/// Parse an activity event stream (`start,duration_s,kind`).
pub fn parse_activity_events(
    stream: impl Read,
    participant_id: &str,
) -> Result<ActivityEventLog, IngestError> {
    let rows = read_rows(stream, ACTIVITY_HEADER)?;

    let mut events = Vec::with_capacity(rows.len());
    for row in &rows {
        let start = parse_datetime(&row.fields[0], row.line)?;
        let duration_s = parse_f64(&row.fields[1], "duration_s", row.line)?;
        let kind = ActivityKind::parse(&row.fields[2]).ok_or_else(|| {
            IngestError::UnknownActivityKind {
                line: Some(row.line),
                kind: row.fields[2].clone(),
            }
        })?;
        events.push(ActivityEvent::new(start, duration_s, kind)?);
    }
    ActivityEventLog::new(participant_id, events)
}

/// Parse a food log. The stream may mix participants; records keep their
/// own ids and are grouped downstream.
pub fn parse_food_log(stream: impl Read) -> Result<Vec<MealRecord>, IngestError> {
    let rows = read_rows(stream, FOOD_HEADER)?;

    let mut meals = Vec::with_capacity(rows.len());
    for row in &rows {
        let participant = row.fields[0].trim().to_string();
        let date = parse_date(&row.fields[1], row.line)?;
        let time_min = parse_hhmm(&row.fields[2], "meal_time", row.line)?;
        let meal_time = crate::timeutil::day_start(date) + chrono::Duration::minutes(i64::from(time_min));
        let meal_kind = MealKind::parse(&row.fields[3]).ok_or_else(|| IngestError::MalformedRow {
            line: Some(row.line),
            detail: format!("unknown meal kind `{}`", row.fields[3]),
        })?;

        let mut macro_values = [0.0; 12];
        for (i, value) in macro_values.iter_mut().enumerate() {
            *value = parse_f64(&row.fields[4 + i], MacroProfile::FIELDS[i], row.line)?;
        }
        let macros = MacroProfile {
            calories: macro_values[0],
            calories_from_fat: macro_values[1],
            saturated_fat_g: macro_values[2],
            trans_fat_g: macro_values[3],
            cholesterol_mg: macro_values[4],
            sodium_mg: macro_values[5],
            total_carbs_g: macro_values[6],
            sugar_g: macro_values[7],
            net_carbs_g: macro_values[8],
            fat_g: macro_values[9],
            protein_g: macro_values[10],
            fiber_g: macro_values[11],
        };
        let meal = MealRecord::new(participant, meal_time, meal_kind, macros).map_err(|e| {
            attach_line(e, row.line)
        })?;
        meals.push(meal);
    }
    Ok(meals)
}

/// Parse a work log. Like the food log, the stream may mix participants.
pub fn parse_work_log(stream: impl Read) -> Result<Vec<WorkdayRecord>, IngestError> {
    let rows = read_rows(stream, WORK_HEADER)?;

    let mut records = Vec::with_capacity(rows.len());
    for row in &rows {
        let participant = row.fields[0].trim().to_string();
        let date = parse_date(&row.fields[1], row.line)?;
        let work_start = parse_hhmm(&row.fields[2], "work_start", row.line)?;
        let work_end = parse_hhmm(&row.fields[3], "work_end", row.line)?;
        let wfh = parse_bool(&row.fields[4], "wfh", row.line)?;
        let pct_sit = parse_f64(&row.fields[5], "pct_sit", row.line)?;
        let pct_stand = parse_f64(&row.fields[6], "pct_stand", row.line)?;
        let pct_walk = parse_f64(&row.fields[7], "pct_walk", row.line)?;
        let phase = Phase::parse(&row.fields[8]).ok_or_else(|| IngestError::MalformedRow {
            line: Some(row.line),
            detail: format!("unknown phase `{}`", row.fields[8]),
        })?;

        let record = WorkdayRecord::new(
            participant, date, work_start, work_end, wfh, pct_sit, pct_stand, pct_walk, phase,
        )
        .map_err(|e| attach_line(e, row.line))?;
        records.push(record);
    }
    Ok(records)
}

/// Stamp a validation error with the CSV line it came from.
fn attach_line(err: IngestError, line: u64) -> IngestError {
    match err {
        IngestError::NegativeMacro { field, value, .. } => IngestError::NegativeMacro {
            line: Some(line),
            field,
            value,
        },
        IngestError::NetCarbExceedsTotal { net, total, .. } => IngestError::NetCarbExceedsTotal {
            line: Some(line),
            net,
            total,
        },
        IngestError::CaloriesFromFatExceedTotal {
            cal_fat, calories, ..
        } => IngestError::CaloriesFromFatExceedTotal {
            line: Some(line),
            cal_fat,
            calories,
        },
        IngestError::PercentSumExceeded { sum, .. } => IngestError::PercentSumExceeded {
            line: Some(line),
            sum,
        },
        IngestError::PercentOutOfRange { field, value, .. } => IngestError::PercentOutOfRange {
            line: Some(line),
            field,
            value,
        },
        IngestError::StartAfterEnd { .. } => IngestError::StartAfterEnd { line: Some(line) },
        other => other,
    }
}

fn fmt_minute(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%d %H:%M").to_string()
}

fn fmt_hhmm(minutes: u32) -> String {
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

pub fn write_cgm_csv(trace: &CgmTrace, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CGM_HEADER}")?;
    for s in trace.samples() {
        writeln!(out, "{},{}", fmt_minute(s.timestamp), s.glucose)?;
    }
    Ok(())
}

pub fn write_activity_csv(log: &ActivityEventLog, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{ACTIVITY_HEADER}")?;
    for e in log.events() {
        writeln!(
            out,
            "{},{},{}",
            e.start.format("%Y-%m-%d %H:%M:%S"),
            e.duration_s,
            e.kind
        )?;
    }
    Ok(())
}

pub fn write_food_csv(meals: &[MealRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{FOOD_HEADER}")?;
    for m in meals {
        let v = m.macros.values();
        writeln!(
            out,
            "{},{},{},{},{}",
            m.participant_id,
            m.meal_time.format("%Y-%m-%d"),
            m.meal_time.format("%H:%M"),
            m.meal_kind.as_str(),
            v.map(|x| x.to_string()).join(",")
        )?;
    }
    Ok(())
}

pub fn write_work_csv(records: &[WorkdayRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{WORK_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.participant_id,
            r.date.format("%Y-%m-%d"),
            fmt_hhmm(r.work_start_min),
            fmt_hhmm(r.work_end_min),
            r.work_from_home,
            r.pct_sitting,
            r.pct_standing,
            r.pct_walking,
            r.phase.as_str()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cgm_identity_parse() {
        let input = "timestamp,glucose_mgdl\n2024-03-04 10:00,100\n2024-03-04 10:15,110\n";
        let trace = parse_cgm(input.as_bytes(), "P1").unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace.samples()[0].glucose, 100.0);
        assert_eq!(trace.samples()[1].glucose, 110.0);
    }

    #[test]
    fn cgm_rows_sorted_and_deduplicated() {
        let input = "timestamp,glucose_mgdl\n\
                     2024-03-04 10:30,120\n\
                     2024-03-04 10:00,100\n\
                     2024-03-04 10:30,125\n";
        let trace = parse_cgm(input.as_bytes(), "P1").unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace.samples()[0].glucose, 100.0);
        assert_eq!(trace.samples()[1].glucose, 120.0); // first occurrence kept
    }

    #[test]
    fn cgm_out_of_range_names_line() {
        let input = "timestamp,glucose_mgdl\n2024-03-04 10:00,100\n2024-03-04 10:15,900\n";
        match parse_cgm(input.as_bytes(), "P1") {
            Err(IngestError::OutOfRange { line: Some(3), value }) => assert_eq!(value, 900.0),
            other => panic!("expected OutOfRange at line 3, got {other:?}"),
        }
    }

    #[test]
    fn cgm_empty_and_malformed() {
        let empty = "timestamp,glucose_mgdl\n";
        assert!(matches!(
            parse_cgm(empty.as_bytes(), "P1"),
            Err(IngestError::EmptyTrace)
        ));

        let bad = "timestamp,glucose_mgdl\n2024-03-04 10:00,abc\n";
        assert!(matches!(
            parse_cgm(bad.as_bytes(), "P1"),
            Err(IngestError::MalformedRow { line: Some(2), .. })
        ));

        let bad_header = "time,glucose\n2024-03-04 10:00,100\n";
        assert!(matches!(
            parse_cgm(bad_header.as_bytes(), "P1"),
            Err(IngestError::MalformedRow { .. })
        ));
    }

    #[test]
    fn activity_single_event() {
        let input = "start,duration_s,kind\n2024-03-04 08:00:00,3600,sedentary\n";
        let log = parse_activity_events(input.as_bytes(), "P1").unwrap();
        assert_eq!(log.events().len(), 1);
        assert_eq!(log.events()[0].kind, ActivityKind::Sedentary);
    }

    #[test]
    fn activity_unknown_kind_and_overlap() {
        let input = "start,duration_s,kind\n2024-03-04 08:00:00,3600,jumping\n";
        assert!(matches!(
            parse_activity_events(input.as_bytes(), "P1"),
            Err(IngestError::UnknownActivityKind { line: Some(2), .. })
        ));

        let input = "start,duration_s,kind\n\
                     2024-03-04 08:00:00,3600,sedentary\n\
                     2024-03-04 08:50:00,600,standing\n";
        assert!(matches!(
            parse_activity_events(input.as_bytes(), "P1"),
            Err(IngestError::OverlappingEvents { .. })
        ));
    }

    #[test]
    fn food_log_parses_lunch() {
        let input = format!(
            "{FOOD_HEADER}\nP1,2024-03-04,12:30,lunch,780,90,3,0,40,900,52,9,50,10,30,1\n"
        );
        let meals = parse_food_log(input.as_bytes()).unwrap();
        assert_eq!(meals.len(), 1);
        assert_eq!(meals[0].macros.calories, 780.0);
        assert_eq!(meals[0].macros.fiber_g, 1.0);
        assert_eq!(meals[0].meal_kind, MealKind::Lunch);
    }

    #[test]
    fn food_log_all_zero_is_valid() {
        let input = format!("{FOOD_HEADER}\nP1,2024-03-04,12:30,lunch,0,0,0,0,0,0,0,0,0,0,0,0\n");
        assert_eq!(parse_food_log(input.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn food_log_rejects_net_carbs_over_total() {
        let input = format!(
            "{FOOD_HEADER}\nP1,2024-03-04,12:30,lunch,500,90,3,0,40,900,50,9,60,10,30,1\n"
        );
        assert!(matches!(
            parse_food_log(input.as_bytes()),
            Err(IngestError::NetCarbExceedsTotal { line: Some(2), .. })
        ));
    }

    #[test]
    fn work_log_parses_and_validates() {
        let input = format!("{WORK_HEADER}\nP1,2024-03-04,09:00,17:00,false,60,30,10,baseline\n");
        let records = parse_work_log(input.as_bytes()).unwrap();
        assert_eq!(records[0].work_start_min, 540);
        assert_eq!(records[0].work_end_min, 1020);
        assert_eq!(records[0].phase, Phase::Baseline);

        let bad_sum = format!("{WORK_HEADER}\nP1,2024-03-04,09:00,17:00,false,50,40,30,baseline\n");
        assert!(matches!(
            parse_work_log(bad_sum.as_bytes()),
            Err(IngestError::PercentSumExceeded { line: Some(2), .. })
        ));

        let inverted = format!("{WORK_HEADER}\nP1,2024-03-04,18:00,09:00,false,50,30,10,baseline\n");
        assert!(matches!(
            parse_work_log(inverted.as_bytes()),
            Err(IngestError::StartAfterEnd { line: Some(2) })
        ));
    }

    #[test]
    fn round_trips_are_identity() {
        let cgm_in = "timestamp,glucose_mgdl\n2024-03-04 10:00,100.5\n2024-03-04 10:15,110\n";
        let trace = parse_cgm(cgm_in.as_bytes(), "P1").unwrap();
        let mut buf = Vec::new();
        write_cgm_csv(&trace, &mut buf).unwrap();
        let reparsed = parse_cgm(buf.as_slice(), "P1").unwrap();
        assert_eq!(trace, reparsed);

        let food_in = format!(
            "{FOOD_HEADER}\nP1,2024-03-04,12:30,lunch,780,90,3,0,40,900,52,9,50,10,30,1\n"
        );
        let meals = parse_food_log(food_in.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_food_csv(&meals, &mut buf).unwrap();
        assert_eq!(parse_food_log(buf.as_slice()).unwrap(), meals);

        let work_in = format!("{WORK_HEADER}\nP1,2024-03-04,09:00,17:00,true,60,30,10,condition1\n");
        let records = parse_work_log(work_in.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_work_csv(&records, &mut buf).unwrap();
        assert_eq!(parse_work_log(buf.as_slice()).unwrap(), records);

        let act_in = "start,duration_s,kind\n2024-03-04 08:00:00,3600,sedentary\n\
                      2024-03-04 09:00:00,1800,primary_lying\n";
        let log = parse_activity_events(act_in.as_bytes(), "P1").unwrap();
        let mut buf = Vec::new();
        write_activity_csv(&log, &mut buf).unwrap();
        assert_eq!(parse_activity_events(buf.as_slice(), "P1").unwrap(), log);
    }
}
