use std::collections::BTreeMap;

use super::config::{FinetuneConfig, FinetuneMode, LossKind, PretrainConfig, TrainConfig};
use super::engine::{execute, Constraint, Run};
use super::log::TrainLog;
use super::loss::class_balanced_weights;
use crate::error::{Error, Result};
use crate::model::{Architecture, ModelInput, ParamSet};
use crate::numgrad::Tensor;
use crate::pipeline::{ClassStats, NightInstance};
use crate::rng::derive_seed;

/// A night without its sepsis label: all that pretraining may see.
#[derive(Debug, Clone, Copy)]
pub struct Profile<'a> {
    pub instance_index: usize,
    temporal: &'a Tensor<f64>,
    statics: &'a [f64],
}

impl ModelInput for Profile<'_> {
    fn temporal(&self) -> &Tensor<f64> {
        self.temporal
    }

    fn statics(&self) -> &[f64] {
        self.statics
    }
}

pub fn strip_labels(instances: &[NightInstance]) -> Vec<Profile<'_>> {
    instances
        .iter()
        .map(|i| Profile {
            instance_index: i.instance_index,
            temporal: &i.temporal,
            statics: &i.statics,
        })
        .collect()
}

/// Class ids for instance discrimination: ranks of the sorted instance indices.
pub fn instance_classes(profiles: &[Profile<'_>]) -> Result<Vec<usize>> {
    let mut rank = BTreeMap::new();
    for p in profiles {
        if rank.insert(p.instance_index, 0).is_some() {
            return Err(Error::input(format!("duplicate instance_index {}", p.instance_index)));
        }
    }
    for (r, slot) in rank.values_mut().enumerate() {
        *slot = r;
    }
    Ok(profiles.iter().map(|p| rank[&p.instance_index]).collect())
}

/// Instance-discrimination pretraining: one class per training night. `arch`
/// supplies everything but the head width, which becomes the instance count.
pub fn nprl_pretrain(
    profiles: &[Profile<'_>],
    arch: &Architecture,
    config: &PretrainConfig,
) -> Result<(ParamSet<f64>, TrainLog)> {
    config.validate()?;
    let targets = instance_classes(profiles)?;
    if profiles.len() < 2 {
        return Err(Error::input("pretraining needs at least two instances"));
    }
    let arch = arch.with_head_classes(profiles.len())?;
    let init = arch.init_params(derive_seed(config.seed, "pretrain-init"));
    let run = Run {
        arch: &arch,
        inputs: profiles,
        targets: &targets,
        class_weights: None,
        epochs: config.epochs,
        batch_size: config.batch_size,
        learning_rate: config.learning_rate,
        seed: config.seed,
        constraint: Constraint::None,
    };
    execute(&run, init)
}

fn labels(instances: &[NightInstance]) -> Vec<usize> {
    instances.iter().map(|i| usize::from(i.label)).collect()
}

fn supervised(
    instances: &[NightInstance],
    arch: &Architecture,
    init: ParamSet<f64>,
    train: &TrainConfig,
    constraint: Constraint,
) -> Result<(ParamSet<f64>, TrainLog)> {
    train.validate()?;
    if arch.config().head_classes != ClassStats::CLASSES {
        return Err(Error::Config("supervised training expects a two-class head".into()));
    }
    let class_weights = match train.loss {
        LossKind::Plain => None,
        LossKind::ClassBalanced(scheme) => {
            Some(class_balanced_weights(&ClassStats::from_instances(instances), scheme)?.to_vec())
        }
    };
    let targets = labels(instances);
    let run = Run {
        arch,
        inputs: instances,
        targets: &targets,
        class_weights,
        epochs: train.epochs,
        batch_size: train.batch_size,
        learning_rate: train.learning_rate,
        seed: train.seed,
        constraint,
    };
    execute(&run, init)
}

/// Fine-tunes from `theta0`, whose head must already be the two-class one.
/// The penalty or projection is measured against `theta0`, head excluded.
pub fn finetune(
    instances: &[NightInstance],
    theta0: &ParamSet<f64>,
    arch: &Architecture,
    config: &FinetuneConfig,
) -> Result<(ParamSet<f64>, TrainLog)> {
    config.validate()?;
    let constraint = match config.mode {
        FinetuneMode::Regularized { lambda } => Constraint::Penalty(lambda),
        FinetuneMode::Projected { gamma } => Constraint::Ball(gamma),
    };
    supervised(instances, arch, theta0.clone(), &config.train, constraint)
}

/// Randomly initialized supervised training, the comparison arm.
pub fn train_baseline(
    instances: &[NightInstance],
    arch: &Architecture,
    config: &TrainConfig,
    init_seed: u64,
) -> Result<(ParamSet<f64>, TrainLog)> {
    let init = arch.init_params(init_seed);
    supervised(instances, arch, init, config, Constraint::None)
}

/// Positive-class probability for each instance.
pub fn predict_scores<I: ModelInput>(arch: &Architecture, params: &ParamSet<f64>, inputs: &[I]) -> Result<Vec<f64>> {
    let out = arch.infer(params, inputs, 256)?;
    Ok(out
        .iter()
        .map(|o| {
            let m = o.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = o.logits.iter().map(|l| (l - m).exp()).sum();
            (o.logits[1] - m).exp() / z
        })
        .collect())
}
