use std::collections::{BTreeSet, HashSet};

use chrono::{Duration, NaiveDateTime};

use super::clean::{clean_record, CleanRecord, TEMPORAL_COLUMNS, VITAL_COLUMNS};
use super::label::{derive_sepsis_labels, FIRST_NIGHT_DAY, LAST_NIGHT_DAY};
use crate::cohort::{day_start, hospital_day, PatientRecord, STATIC_COLUMNS};
use crate::error::{Error, Result};
use crate::model::{FeatureSchema, ModelInput, WINDOW_LEN};
use crate::numgrad::Tensor;

/// Window opens at 22:00 the evening before and closes at 06:00.
pub const WINDOW_END_HOUR: i64 = 6;
/// Prediction horizon after the window closes.
pub const HORIZON_HOURS: i64 = 24;

/// One patient-night.
#[derive(Debug, Clone, PartialEq)]
pub struct NightInstance {
    pub patient_id: String,
    pub day_index: u32,
    pub instance_index: usize,
    /// `WINDOW_LEN × T`, row 0 at 22:00.
    pub temporal: Tensor<f64>,
    pub statics: Vec<f64>,
    pub label: u8,
}

impl ModelInput for NightInstance {
    fn temporal(&self) -> &Tensor<f64> {
        &self.temporal
    }

    fn statics(&self) -> &[f64] {
        &self.statics
    }
}

/// Table I feature subsets: 1 = nightly vitals, 2 = admission statics,
/// 3 = cumulative exposures.
pub type Subsets = BTreeSet<u8>;

pub fn all_subsets() -> Subsets {
    [1, 2, 3].into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub subsets: Subsets,
    pub instances: Vec<NightInstance>,
}

impl Dataset {
    pub fn class_stats(&self) -> ClassStats {
        ClassStats::from_instances(&self.instances)
    }

    /// Instance indices must be unique; everything keyed on them depends on it.
    pub fn check_unique_indices(&self) -> Result<()> {
        check_unique_indices(&self.instances)
    }
}

pub fn check_unique_indices(instances: &[NightInstance]) -> Result<()> {
    let mut seen = HashSet::with_capacity(instances.len());
    for inst in instances {
        if !seen.insert(inst.instance_index) {
            return Err(Error::input(format!("duplicate instance_index {}", inst.instance_index)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassStats {
    pub n: usize,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl ClassStats {
    pub const CLASSES: usize = 2;

    pub fn new(n_pos: usize, n_neg: usize) -> Self {
        ClassStats {
            n: n_pos + n_neg,
            n_pos,
            n_neg,
        }
    }

    pub fn from_instances<'a>(instances: impl IntoIterator<Item = &'a NightInstance>) -> Self {
        let (mut pos, mut neg) = (0, 0);
        for inst in instances {
            if inst.label == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
        }
        Self::new(pos, neg)
    }

    /// Counts indexed by class id (0 = negative, 1 = positive).
    pub fn counts(&self) -> [usize; 2] {
        [self.n_neg, self.n_pos]
    }
}

/// Close of the window for hospital day `day`.
pub fn window_end(admit_ts: NaiveDateTime, day: i64) -> NaiveDateTime {
    day_start(admit_ts, day) + Duration::hours(WINDOW_END_HOUR)
}

/// Last hospital day whose closing midnight is still inside the stay.
pub fn last_full_day(record: &CleanRecord) -> Option<i64> {
    let end = record.end()?;
    Some(hospital_day(record.admit_ts, end) - 1)
}

/// Why a candidate night produced no instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExtractionStats {
    pub patients: usize,
    pub septic_patients: usize,
    pub instances: usize,
    pub positives: usize,
    pub dropped_missing: usize,
    pub dropped_after_onset: usize,
}

impl ExtractionStats {
    fn merge(&mut self, other: &ExtractionStats) {
        self.patients += other.patients;
        self.septic_patients += other.septic_patients;
        self.instances += other.instances;
        self.positives += other.positives;
        self.dropped_missing += other.dropped_missing;
        self.dropped_after_onset += other.dropped_after_onset;
    }
}

/// Night instances for one cleaned record with every Table I column.
/// `instance_index` counts up from `first_index`.
pub fn extract_night_instances(
    record: &CleanRecord,
    onset: Option<NaiveDateTime>,
    first_index: usize,
) -> (Vec<NightInstance>, ExtractionStats) {
    let mut stats = ExtractionStats {
        patients: 1,
        septic_patients: usize::from(onset.is_some()),
        ..ExtractionStats::default()
    };
    let mut out = Vec::new();
    let Some(last_day) = last_full_day(record) else {
        return (out, stats);
    };
    for day in FIRST_NIGHT_DAY..=LAST_NIGHT_DAY.min(last_day) {
        let end = window_end(record.admit_ts, day);
        if onset.is_some_and(|t| t <= end) {
            stats.dropped_after_onset += 1;
            continue;
        }
        let mut data = Vec::with_capacity(WINDOW_LEN * TEMPORAL_COLUMNS.len());
        let complete = (0..WINDOW_LEN as i64).all(|k| {
            let ts = end - Duration::hours(WINDOW_LEN as i64 - 1 - k);
            match record.row_at(ts) {
                Some(row) if row.iter().all(Option::is_some) => {
                    data.extend(row.iter().flatten());
                    true
                }
                _ => false,
            }
        });
        if !complete {
            stats.dropped_missing += 1;
            continue;
        }
        let label = onset.is_some_and(|t| t > end && t <= end + Duration::hours(HORIZON_HOURS));
        out.push(NightInstance {
            patient_id: record.patient_id.clone(),
            day_index: day as u32,
            instance_index: first_index + out.len(),
            temporal: Tensor::new(vec![WINDOW_LEN, TEMPORAL_COLUMNS.len()], data).expect("window shape"),
            statics: record.statics.clone(),
            label: u8::from(label),
        });
    }
    stats.instances = out.len();
    stats.positives = out.iter().filter(|i| i.label == 1).count();
    (out, stats)
}

pub fn full_schema() -> FeatureSchema {
    FeatureSchema::new(
        TEMPORAL_COLUMNS.iter().map(|s| s.to_string()).collect(),
        STATIC_COLUMNS.iter().map(|s| s.to_string()).collect(),
    )
    .expect("static column names are unique")
}

/// Cleans, labels and windows every record; indices are assigned in record order.
pub fn extract_dataset(records: &[PatientRecord]) -> Result<(Dataset, ExtractionStats)> {
    let mut instances = Vec::new();
    let mut stats = ExtractionStats::default();
    for record in records {
        let onset = derive_sepsis_labels(record)?;
        let clean = clean_record(record);
        let (mut found, s) = extract_night_instances(&clean, onset, instances.len());
        stats.merge(&s);
        instances.append(&mut found);
    }
    let dataset = Dataset {
        schema: full_schema(),
        subsets: all_subsets(),
        instances,
    };
    Ok((dataset, stats))
}

/// Keeps the columns of the requested subsets. Subset 1 is mandatory.
pub fn select_features(dataset: &Dataset, subsets: &Subsets) -> Result<Dataset> {
    if !subsets.contains(&1) {
        return Err(Error::input("feature subset 1 must be selected"));
    }
    if let Some(bad) = subsets.iter().find(|s| !(1..=3).contains(*s)) {
        return Err(Error::input(format!("unknown feature subset {bad}")));
    }
    if !subsets.is_subset(&dataset.subsets) {
        return Err(Error::input(format!(
            "dataset carries subsets {:?}, cannot select {:?}",
            dataset.subsets, subsets
        )));
    }
    let names = dataset.schema.temporal_names();
    let keep: Vec<usize> = (0..names.len())
        .filter(|&c| {
            let vital = TEMPORAL_COLUMNS[..VITAL_COLUMNS].contains(&names[c].as_str());
            vital || subsets.contains(&3)
        })
        .collect();
    let keep_statics = subsets.contains(&2);
    let schema = FeatureSchema::new(
        keep.iter().map(|&c| names[c].clone()).collect(),
        if keep_statics {
            dataset.schema.static_names().to_vec()
        } else {
            Vec::new()
        },
    )?;
    let t_in = names.len();
    let instances = dataset
        .instances
        .iter()
        .map(|inst| {
            let data = inst.temporal.data();
            let cols: Vec<f64> = (0..WINDOW_LEN)
                .flat_map(|r| keep.iter().map(move |&c| data[r * t_in + c]))
                .collect();
            NightInstance {
                temporal: Tensor::new(vec![WINDOW_LEN, keep.len()], cols).expect("window shape"),
                statics: if keep_statics { inst.statics.clone() } else { Vec::new() },
                ..inst.clone()
            }
        })
        .collect();
    Ok(Dataset {
        schema,
        subsets: subsets.clone(),
        instances,
    })
}
