use std::time::Instant;

use rand::seq::SliceRandom;

use super::log::{pairwise_cosine, EpochRecord, TrainLog, COSINE_PAIR_BUDGET};
use super::loss::erm_loss;
use crate::error::{Error, Result};
use crate::model::{frobenius_distance, is_head, project_in_place, Architecture, ModelInput, ParamSet};
use crate::numgrad::{adam_step, softmax_xent, OptimizerState, Tensor};
use crate::rng::{derive_seed, stream_rng};

/// Batch size for evaluation passes; only affects speed.
const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Constraint {
    None,
    Penalty(f64),
    Ball(f64),
}

pub(crate) struct Run<'a, I> {
    pub arch: &'a Architecture,
    pub inputs: &'a [I],
    pub targets: &'a [usize],
    pub class_weights: Option<Vec<f64>>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub constraint: Constraint,
}

/// Loss, accuracy and representation geometry over the whole input set.
fn evaluate<I: ModelInput>(run: &Run<'_, I>, params: &ParamSet<f64>, anchor: &ParamSet<f64>, epoch: usize) -> Result<EpochRecord> {
    let out = run.arch.infer(params, run.inputs, EVAL_BATCH)?;
    let classes = run.arch.config().head_classes;
    let logits: Vec<f64> = out.iter().flat_map(|o| o.logits.iter().copied()).collect();
    let logits = Tensor::matrix(out.len(), classes, logits)?;
    let (loss, _) = softmax_xent(&logits, run.targets, run.class_weights.as_deref())?;
    let correct = out
        .iter()
        .zip(run.targets)
        .filter(|(o, &y)| argmax(&o.logits) == y)
        .count();
    let reps: Vec<Vec<f64>> = out.into_iter().map(|o| o.representation).collect();
    let (mean_cosine, mean_abs_cosine) = pairwise_cosine(&reps, COSINE_PAIR_BUDGET, derive_seed(run.seed, "cosine"));
    Ok(EpochRecord {
        epoch,
        loss,
        accuracy: correct as f64 / run.targets.len() as f64,
        frob_dist: frobenius_distance(params, anchor, true)?,
        mean_cosine,
        mean_abs_cosine,
    })
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Mini-batch Adam from `init`, which also serves as the anchor θ0.
pub(crate) fn execute<I: ModelInput>(run: &Run<'_, I>, init: ParamSet<f64>) -> Result<(ParamSet<f64>, TrainLog)> {
    let started = Instant::now();
    if run.inputs.is_empty() {
        return Err(Error::input("no training instances"));
    }
    if run.inputs.len() != run.targets.len() {
        return Err(Error::shape("inputs and targets differ in length"));
    }
    run.arch.check_params(&init)?;
    let anchor = init.clone();
    let mut params = init;
    let mut opt = OptimizerState::new(&params, run.learning_rate)?;
    let mut records = vec![evaluate(run, &params, &anchor, 0)?];
    let mut order: Vec<usize> = (0..run.inputs.len()).collect();
    let shuffle_seed = derive_seed(run.seed, "shuffle");
    for epoch in 1..=run.epochs {
        order.shuffle(&mut stream_rng(shuffle_seed, epoch as u64));
        for chunk in order.chunks(run.batch_size) {
            let batch: Vec<&I> = chunk.iter().map(|&i| &run.inputs[i]).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| run.targets[i]).collect();
            let (_, mut grads) = erm_loss(run.arch, &params, &batch, &labels, run.class_weights.as_deref())?;
            if let Constraint::Penalty(lambda) = run.constraint {
                if lambda > 0.0 {
                    add_penalty_gradient(&mut grads, &params, &anchor, lambda);
                }
            }
            adam_step(&mut params, &grads, &mut opt)?;
            if let Constraint::Ball(gamma) = run.constraint {
                project_in_place(&mut params, &anchor, gamma, true)?;
            }
        }
        if !params.is_finite() {
            return Err(Error::numeric(format!("parameters diverged in epoch {epoch}")));
        }
        records.push(evaluate(run, &params, &anchor, epoch)?);
    }
    Ok((
        params,
        TrainLog {
            records,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    ))
}

/// Gradient of `(λ/2)‖θ − θ0‖²_F` over non-head tensors: `λ(θ − θ0)`.
pub(crate) fn add_penalty_gradient(grads: &mut ParamSet<f64>, params: &ParamSet<f64>, anchor: &ParamSet<f64>, lambda: f64) {
    for (name, g) in grads.iter_mut() {
        if is_head(name) {
            continue;
        }
        let (p, p0) = (params.get(name).expect("same layout"), anchor.get(name).expect("same layout"));
        for ((gi, &x), &x0) in g.data_mut().iter_mut().zip(p.data()).zip(p0.data()) {
            *gi += lambda * (x - x0);
        }
    }
}

/// `(λ/2)‖θ − θ0‖²_F` over non-head tensors.
pub fn penalty_value(params: &ParamSet<f64>, anchor: &ParamSet<f64>, lambda: f64) -> Result<f64> {
    let d = frobenius_distance(params, anchor, true)?;
    Ok(0.5 * lambda * d * d)
}
