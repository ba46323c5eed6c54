use chrono::{Duration, NaiveDateTime};

use crate::cohort::{hospital_day, PatientRecord};
use crate::error::{Error, Result};

/// Hospital days on which a positive culture can mark an onset, and which
/// carry a prediction night.
pub const FIRST_NIGHT_DAY: i64 = 3;
pub const LAST_NIGHT_DAY: i64 = 14;

/// Half-width of the ΔSOFA comparison around a culture draw.
pub const SOFA_WINDOW_HOURS: i64 = 72;
pub const SOFA_RISE: i64 = 2;

/// Earliest positive culture on days 3–14 whose SOFA rises by at least two
/// points: max over (t, t+72h] minus min over [t−72h, t].
pub fn derive_sepsis_labels(record: &PatientRecord) -> Result<Option<NaiveDateTime>> {
    if record.sofa.is_empty() {
        return Err(Error::input(format!("{} has no SOFA scores", record.patient_id)));
    }
    let window = Duration::hours(SOFA_WINDOW_HOURS);
    let qualifies = |t: NaiveDateTime| {
        let before = record
            .sofa
            .iter()
            .filter(|s| s.ts >= t - window && s.ts <= t)
            .map(|s| i64::from(s.score))
            .min();
        let after = record
            .sofa
            .iter()
            .filter(|s| s.ts > t && s.ts <= t + window)
            .map(|s| i64::from(s.score))
            .max();
        matches!((before, after), (Some(lo), Some(hi)) if hi - lo >= SOFA_RISE)
    };
    Ok(record
        .cultures
        .iter()
        .filter(|c| c.positive)
        .map(|c| c.ts)
        .filter(|&t| (FIRST_NIGHT_DAY..=LAST_NIGHT_DAY).contains(&hospital_day(record.admit_ts, t)))
        .filter(|&t| qualifies(t))
        .min())
}
