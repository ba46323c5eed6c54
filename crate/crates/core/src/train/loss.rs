use crate::error::{Error, Result};
use crate::model::{bind, Architecture, Batch, ModelInput, ParamSet};
use crate::numgrad::{Gradients, Tape};
use crate::pipeline::ClassStats;

use super::config::BalanceScheme;

/// Mean cross-entropy of a batch and its gradient with respect to every
/// parameter. With `class_weights`, instance `i` contributes `w_{y_i} · ℓ_i`.
pub fn erm_loss<I: ModelInput + ?Sized>(
    arch: &Architecture,
    params: &ParamSet<f64>,
    batch: &[&I],
    labels: &[usize],
    class_weights: Option<&[f64]>,
) -> Result<(f64, Gradients<f64>)> {
    if batch.is_empty() {
        return Err(Error::input("erm_loss needs a non-empty batch"));
    }
    if batch.len() != labels.len() {
        return Err(Error::shape(format!("{} inputs but {} labels", batch.len(), labels.len())));
    }
    let data = Batch::from_inputs(batch, arch)?;
    let mut tape = Tape::new();
    let bound = bind(&mut tape, params, true);
    let vars = arch.build(&mut tape, &bound, &data)?;
    let loss = tape.softmax_xent(vars.logits, labels, class_weights)?;
    let value = tape.value(loss).data()[0];
    if !value.is_finite() {
        return Err(Error::numeric("training loss is not finite"));
    }
    let mut adj = tape.backward(loss)?;
    let mut grads = Gradients::new();
    for (name, var) in bound.iter() {
        let g = match adj.take(var) {
            Some(g) => g,
            None => params.require(name)?.map(|_| 0.0),
        };
        grads.insert(name, g);
    }
    Ok((value, grads))
}

/// Per-class loss weights, indexed by class id (0 = negative, 1 = positive).
pub fn class_balanced_weights(stats: &ClassStats, scheme: BalanceScheme) -> Result<[f64; 2]> {
    let counts = stats.counts();
    if counts.contains(&0) {
        return Err(Error::input("class-balanced weights need every class present"));
    }
    let n = stats.n as f64;
    let c = ClassStats::CLASSES as f64;
    match scheme {
        BalanceScheme::InverseFrequency => Ok(counts.map(|nc| n / (c * nc as f64))),
        BalanceScheme::EffectiveNumber { beta } => {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::input(format!("beta {beta} outside [0, 1)")));
            }
            // (1 − β^{n_c}) computed as −expm1(n_c ln β) to stay exact for β near 1.
            let raw = counts.map(|nc| {
                let effective = if beta == 0.0 { 1.0 } else { -(nc as f64 * beta.ln()).exp_m1() };
                (1.0 - beta) / effective
            });
            let mass: f64 = raw.iter().zip(counts).map(|(w, nc)| w * nc as f64).sum();
            Ok(raw.map(|w| w * n / mass))
        }
    }
}
