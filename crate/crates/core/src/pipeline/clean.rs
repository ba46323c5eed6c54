use chrono::{Duration, NaiveDateTime, Timelike};

use crate::cohort::{HourlyField, PatientRecord};

/// Temporal columns after cleaning: subset-1 vitals (SBP folded into MAP)
/// followed by the subset-3 cumulative exposures.
pub const TEMPORAL_COLUMNS: [&str; 11] = [
    "heart_rate",
    "dbp",
    "map",
    "resp_rate",
    "temperature",
    "fio2",
    "iv_bolus_cum",
    "rbc_units_cum",
    "vent_days_cum",
    "surgeries_cum",
    "surgery_duration_cum",
];

/// Number of leading [`TEMPORAL_COLUMNS`] that belong to subset 1.
pub const VITAL_COLUMNS: usize = 6;

/// Mean arterial pressure from diastolic and systolic readings.
pub fn derive_map(dbp: Option<f64>, sbp: Option<f64>) -> Option<f64> {
    Some((2.0 * dbp? + sbp?) / 3.0)
}

/// Forward fill; leading gaps stay missing.
pub fn locf_impute(series: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut last = None;
    series
        .iter()
        .map(|v| {
            if v.is_some() {
                last = *v;
            }
            last
        })
        .collect()
}

pub fn floor_hour(ts: NaiveDateTime) -> NaiveDateTime {
    ts.with_nanosecond(0)
        .and_then(|t| t.with_second(0))
        .and_then(|t| t.with_minute(0))
        .expect("zeroing sub-hour fields is always valid")
}

/// A record on a dense hourly grid with MAP derived and LOCF applied.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanRecord {
    pub patient_id: String,
    pub admit_ts: NaiveDateTime,
    /// Time of `rows[0]`.
    pub start: NaiveDateTime,
    /// One row per hour, columns as in [`TEMPORAL_COLUMNS`].
    pub rows: Vec<[Option<f64>; 11]>,
    pub statics: Vec<f64>,
}

impl CleanRecord {
    /// Last hour on the grid, or `None` for a record without observations.
    pub fn end(&self) -> Option<NaiveDateTime> {
        let n = i64::try_from(self.rows.len()).ok()?;
        (n > 0).then(|| self.start + Duration::hours(n - 1))
    }

    pub fn row_at(&self, ts: NaiveDateTime) -> Option<&[Option<f64>; 11]> {
        let h = (ts - self.start).num_hours();
        if ts < self.start || self.start + Duration::hours(h) != ts {
            return None;
        }
        self.rows.get(usize::try_from(h).ok()?)
    }
}

/// Puts readings on an hourly grid (the last reading inside an hour wins, per
/// field), forward-fills every raw column, then derives MAP and drops SBP.
pub fn clean_record(record: &PatientRecord) -> CleanRecord {
    let start = floor_hour(record.admit_ts);
    let hours = record
        .hourly
        .last()
        .map_or(0, |o| (floor_hour(o.ts) - start).num_hours() + 1)
        .max(0) as usize;
    let mut raw: Vec<Vec<Option<f64>>> = vec![vec![None; hours]; HourlyField::ALL.len()];
    for obs in &record.hourly {
        let h = (floor_hour(obs.ts) - start).num_hours();
        let Ok(h) = usize::try_from(h) else { continue };
        for field in HourlyField::ALL {
            if let Some(v) = obs.get(field) {
                raw[field.index()][h] = Some(v);
            }
        }
    }
    let filled: Vec<Vec<Option<f64>>> = raw.iter().map(|c| locf_impute(c)).collect();
    let col = |f: HourlyField, h: usize| filled[f.index()][h];
    let rows = (0..hours)
        .map(|h| {
            [
                col(HourlyField::HeartRate, h),
                col(HourlyField::Dbp, h),
                derive_map(col(HourlyField::Dbp, h), col(HourlyField::Sbp, h)),
                col(HourlyField::RespRate, h),
                col(HourlyField::Temperature, h),
                col(HourlyField::Fio2, h),
                col(HourlyField::IvBolusCum, h),
                col(HourlyField::RbcUnitsCum, h),
                col(HourlyField::VentDaysCum, h),
                col(HourlyField::SurgeriesCum, h),
                col(HourlyField::SurgeryDurationCum, h),
            ]
        })
        .collect();
    CleanRecord {
        patient_id: record.patient_id.clone(),
        admit_ts: record.admit_ts,
        start,
        rows,
        statics: record.statics.clone(),
    }
}
