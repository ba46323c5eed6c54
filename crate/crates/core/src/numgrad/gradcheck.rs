use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{NamedTensors, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Central-difference half step.
    pub step: f64,
    /// Tensors larger than this have a seeded random subset of coordinates checked.
    pub max_coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-3,
            max_coords_per_tensor: 24,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub coords_checked: usize,
}

/// Compares `analytic` against central differences of `value` around `params`.
///
/// The per-coordinate error is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<S, F>(
    mut value: F,
    params: &NamedTensors<S>,
    analytic: &NamedTensors<S>,
    config: GradCheckConfig,
) -> Result<GradCheckReport>
where
    S: Scalar,
    F: FnMut(&NamedTensors<S>) -> Result<S>,
{
    if config.step <= 0.0 {
        return Err(Error::input("grad_check step must be positive"));
    }
    params.check_same_layout(analytic)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut probe = params.clone();
    let h = S::of(config.step);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        coords_checked: 0,
    };

    let names: Vec<String> = params.names().map(str::to_owned).collect();
    for name in names {
        let len = params.require(&name)?.len();
        let coords: Vec<usize> = if len <= config.max_coords_per_tensor {
            (0..len).collect()
        } else {
            let mut picked = sample(&mut rng, len, config.max_coords_per_tensor).into_vec();
            picked.sort_unstable();
            picked
        };
        for idx in coords {
            let base = params.require(&name)?.data()[idx];
            let mut eval_at = |v: S, probe: &mut NamedTensors<S>| -> Result<f64> {
                probe.get_mut(&name).expect("cloned layout").data_mut()[idx] = v;
                let f = value(probe)?.as_f64();
                if !f.is_finite() {
                    return Err(Error::numeric(format!("objective non-finite at {name}[{idx}]")));
                }
                Ok(f)
            };
            let plus = eval_at(base + h, &mut probe)?;
            let minus = eval_at(base - h, &mut probe)?;
            probe.get_mut(&name).expect("cloned layout").data_mut()[idx] = base;

            let numeric = (plus - minus) / (2.0 * config.step);
            let a = analytic.require(&name)?.data()[idx].as_f64();
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coords_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = name.clone();
                report.worst_index = idx;
            }
        }
    }
    Ok(report)
}
