//! Seeded synthetic ICU cohort: hourly vitals and exposures, admission
//! features, SOFA series, culture draws, planted onsets and missingness.

mod generator;
mod io;
mod record;

pub use generator::{
    generate_cohort, inject_missingness, ExposureConfig, GeneratorConfig, VitalModel, SOFA_INTERVAL_HOURS,
};
pub(crate) use io::{csv_reader, csv_writer, rows, write_err};
pub use io::{
    format_ts, parse_ts, read_cohort, write_cohort, CULTURES_FILE, HOURLY_FILE, PATIENTS_FILE, SOFA_FILE, TS_FORMAT,
};
pub use record::{
    day_start, hospital_day, ADMISSION_DAY_INDEX, is_on_the_hour, Culture, HourlyField, HourlyObservation, PatientRecord, SofaScore,
    HOURLY_FIELD_COUNT, STATIC_COLUMNS,
};
