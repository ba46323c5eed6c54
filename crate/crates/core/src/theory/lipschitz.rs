use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{is_head, Architecture, ModelInput, ParamSet};
use crate::rng::stream_rng;

/// Largest observed `‖rep(θ + Δ, x) − rep(θ, x)‖₂ / ‖Δ‖_F` over random
/// parameter-space probes. A lower bound on the true constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEstimate {
    pub l_hat: f64,
    pub n_probes: usize,
    pub delta: f64,
    pub ratios: Vec<f64>,
}

/// Probe `p` perturbs every non-head entry along a Gaussian direction drawn
/// from stream `p` of `seed`, scaled to Frobenius norm `delta`. Probes are
/// independent of each other and of the instance set, so adding probes or
/// instances can only raise the estimate.
pub fn estimate_lipschitz_with<I, F>(
    rep: F,
    params: &ParamSet<f64>,
    instances: &[I],
    n_probes: usize,
    delta: f64,
    seed: u64,
) -> Result<LipschitzEstimate>
where
    F: Fn(&ParamSet<f64>, &[I]) -> Result<Vec<Vec<f64>>>,
{
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::input("probe scale delta must be positive"));
    }
    if instances.is_empty() || n_probes == 0 {
        return Err(Error::input("Lipschitz estimation needs instances and probes"));
    }
    let base = rep(params, instances)?;
    let mut ratios = Vec::with_capacity(n_probes);
    for p in 0..n_probes {
        let mut rng = stream_rng(seed, p as u64);
        let mut direction = params.zeros_like();
        let mut norm2 = 0.0;
        for (name, t) in direction.iter_mut() {
            if is_head(name) {
                continue;
            }
            for v in t.data_mut() {
                *v = StandardNormal.sample(&mut rng);
                norm2 += *v * *v;
            }
        }
        if norm2 == 0.0 {
            return Err(Error::input("no non-head parameters to perturb"));
        }
        let scale = delta / norm2.sqrt();
        let mut shifted = params.clone();
        for ((_, t), (_, d)) in shifted.iter_mut().zip(direction.iter()) {
            for (v, dv) in t.data_mut().iter_mut().zip(d.data()) {
                *v += scale * dv;
            }
        }
        let moved = rep(&shifted, instances)?;
        let mut worst: f64 = 0.0;
        for (a, b) in moved.iter().zip(&base) {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            if !d.is_finite() {
                return Err(Error::numeric("representation became non-finite under a probe"));
            }
            worst = worst.max(d / delta);
        }
        ratios.push(worst);
    }
    let l_hat = ratios.iter().copied().fold(0.0, f64::max);
    if l_hat <= 0.0 {
        return Err(Error::numeric(
            "degenerate Lipschitz estimate: representation does not depend on the probed parameters",
        ));
    }
    Ok(LipschitzEstimate {
        l_hat,
        n_probes,
        delta,
        ratios,
    })
}

/// [`estimate_lipschitz_with`] on the model's representation layer.
pub fn estimate_lipschitz<I: ModelInput>(
    arch: &Architecture,
    params: &ParamSet<f64>,
    instances: &[I],
    n_probes: usize,
    delta: f64,
    seed: u64,
) -> Result<LipschitzEstimate> {
    let rep = |p: &ParamSet<f64>, xs: &[I]| -> Result<Vec<Vec<f64>>> {
        Ok(arch.infer(p, xs, 256)?.into_iter().map(|o| o.representation).collect())
    };
    estimate_lipschitz_with(rep, params, instances, n_probes, delta, seed)
}
