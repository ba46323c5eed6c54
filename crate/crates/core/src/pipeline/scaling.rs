use std::collections::HashSet;

use super::extract::NightInstance;
use crate::error::{Error, Result};
use crate::numgrad::Tensor;

/// Scaled values outside the training range are clamped to this interval.
pub const CLAMP_RANGE: (f64, f64) = (-0.5, 1.5);

/// Per-column extremes seen in training data. Temporal extremes pool all
/// window rows of a column.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub temporal_min: Vec<f64>,
    pub temporal_max: Vec<f64>,
    pub static_min: Vec<f64>,
    pub static_max: Vec<f64>,
}

/// `(v − min)/(max − min)` without clamping; a constant column maps to 0.
pub fn scale_value(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (v - min) / (max - min)
    } else {
        0.0
    }
}

pub fn fit_minmax<'a>(train: impl IntoIterator<Item = &'a NightInstance>) -> Result<ScalingParams> {
    let mut params: Option<ScalingParams> = None;
    for inst in train {
        let t = inst.temporal.cols();
        let p = params.get_or_insert_with(|| ScalingParams {
            temporal_min: vec![f64::INFINITY; t],
            temporal_max: vec![f64::NEG_INFINITY; t],
            static_min: vec![f64::INFINITY; inst.statics.len()],
            static_max: vec![f64::NEG_INFINITY; inst.statics.len()],
        });
        if p.temporal_min.len() != t || p.static_min.len() != inst.statics.len() {
            return Err(Error::shape("instances disagree on feature dimensions"));
        }
        for row in inst.temporal.data().chunks(t) {
            for (c, &v) in row.iter().enumerate() {
                p.temporal_min[c] = p.temporal_min[c].min(v);
                p.temporal_max[c] = p.temporal_max[c].max(v);
            }
        }
        for (c, &v) in inst.statics.iter().enumerate() {
            p.static_min[c] = p.static_min[c].min(v);
            p.static_max[c] = p.static_max[c].max(v);
        }
    }
    params.ok_or_else(|| Error::input("cannot fit scaling on an empty training set"))
}

/// Fits on `train` after confirming it shares no instance with `test`.
pub fn fit_minmax_checked(train: &[NightInstance], test: &[NightInstance]) -> Result<ScalingParams> {
    check_disjoint(train, test)?;
    fit_minmax(train)
}

pub fn check_disjoint(train: &[NightInstance], test: &[NightInstance]) -> Result<()> {
    let test_ids: HashSet<usize> = test.iter().map(|i| i.instance_index).collect();
    if let Some(shared) = train.iter().find(|i| test_ids.contains(&i.instance_index)) {
        return Err(Error::Leakage(format!(
            "instance {} appears in both training and test data",
            shared.instance_index
        )));
    }
    Ok(())
}

pub fn apply_minmax(instances: &[NightInstance], params: &ScalingParams) -> Result<Vec<NightInstance>> {
    let (lo, hi) = CLAMP_RANGE;
    instances
        .iter()
        .map(|inst| {
            let t = inst.temporal.cols();
            if t != params.temporal_min.len() || inst.statics.len() != params.static_min.len() {
                return Err(Error::shape("instance dimensions do not match scaling parameters"));
            }
            let data = inst
                .temporal
                .data()
                .iter()
                .enumerate()
                .map(|(i, &v)| scale_value(v, params.temporal_min[i % t], params.temporal_max[i % t]).clamp(lo, hi))
                .collect();
            let statics = inst
                .statics
                .iter()
                .enumerate()
                .map(|(c, &v)| scale_value(v, params.static_min[c], params.static_max[c]).clamp(lo, hi))
                .collect();
            Ok(NightInstance {
                temporal: Tensor::new(inst.temporal.dims().to_vec(), data)?,
                statics,
                ..inst.clone()
            })
        })
        .collect()
}
