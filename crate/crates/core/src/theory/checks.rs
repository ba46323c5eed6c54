use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Architecture, ModelInput, ParamSet};
use crate::rng::stream_rng;

/// Constant slack in the pairwise bound: `‖a* − b*‖² ≥ d0² − d0/2 − 1/32`.
pub const THEOREM_SLACK: f64 = 1.0 / 32.0;
/// Printed bound on the fine-tuned mean inner product.
pub const COROLLARY_LIMIT: f64 = 0.37;

/// `√2/4 + 1/64`, the exact constant behind [`COROLLARY_LIMIT`].
pub fn corollary_bound_constant() -> f64 {
    std::f64::consts::SQRT_2 / 4.0 + 1.0 / 64.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairPlan {
    /// Every unordered pair `i < j`.
    All,
    /// Uniform ordered pairs with `i ≠ j`, drawn with replacement.
    Sample(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCheck {
    pub pairs_checked: usize,
    pub violations: usize,
    /// Smallest `lhs − rhs`; negative iff some pair violates the bound.
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryCheck {
    pub m0: f64,
    pub m_star: f64,
    pub tolerance: f64,
    pub bound_ok: bool,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn reps<I: ModelInput>(arch: &Architecture, params: &ParamSet<f64>, instances: &[I]) -> Result<Vec<Vec<f64>>> {
    Ok(arch.infer(params, instances, 256)?.into_iter().map(|o| o.representation).collect())
}

/// Tests the pairwise bound on precomputed representations.
pub fn check_theorem1_reps(r0: &[Vec<f64>], r_star: &[Vec<f64>], plan: PairPlan, seed: u64) -> Result<TheoremCheck> {
    let n = r0.len();
    if n != r_star.len() {
        return Err(Error::shape("representation sets differ in size"));
    }
    if n < 2 {
        return Err(Error::input("need at least two instances to form pairs"));
    }
    let mut check = TheoremCheck {
        pairs_checked: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
    };
    let mut visit = |i: usize, j: usize| {
        let d0 = dist(&r0[i], &r0[j]);
        let lhs = dist(&r_star[i], &r_star[j]).powi(2);
        let rhs = d0 * d0 - d0 / 2.0 - THEOREM_SLACK;
        let margin = lhs - rhs;
        check.pairs_checked += 1;
        if margin < 0.0 {
            check.violations += 1;
        }
        check.worst_margin = check.worst_margin.min(margin);
    };
    match plan {
        PairPlan::All => {
            for i in 0..n {
                for j in i + 1..n {
                    visit(i, j);
                }
            }
        }
        PairPlan::Sample(count) => {
            if count == 0 {
                return Err(Error::input("pair sample size must be positive"));
            }
            let mut rng = stream_rng(seed, 0);
            for _ in 0..count {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                visit(i, j);
            }
        }
    }
    Ok(check)
}

pub fn check_theorem1<I: ModelInput>(
    arch: &Architecture,
    theta0: &ParamSet<f64>,
    theta_star: &ParamSet<f64>,
    instances: &[I],
    plan: PairPlan,
    seed: u64,
) -> Result<TheoremCheck> {
    check_theorem1_reps(&reps(arch, theta0, instances)?, &reps(arch, theta_star, instances)?, plan, seed)
}

/// Mean of `uᵢᵀuⱼ` over ordered pairs `i ≠ j`, via `‖Σu‖² − Σ‖u‖²`.
pub fn mean_pairwise_inner(vectors: &[Vec<f64>]) -> Result<f64> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::input("need at least two vectors"));
    }
    let mut total = vec![0.0; vectors[0].len()];
    let mut self_dots = 0.0;
    for v in vectors {
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
        self_dots += v.iter().map(|x| x * x).sum::<f64>();
    }
    let sum_sq: f64 = total.iter().map(|x| x * x).sum();
    Ok((sum_sq - self_dots) / (n * (n - 1)) as f64)
}

/// Unit-norm tolerance for representations fed to the corollary check.
const UNIT_TOL: f64 = 1e-6;

/// Compares the fine-tuned mean inner product with the bound, widened by the
/// measured deviation of the pretrained mean from zero.
pub fn check_corollary1_reps(r0: &[Vec<f64>], r_star: &[Vec<f64>], tolerance: f64) -> Result<CorollaryCheck> {
    if r0.len() != r_star.len() {
        return Err(Error::shape("representation sets differ in size"));
    }
    for r in r0.iter().chain(r_star) {
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::Config(format!(
                "corollary check needs unit-norm representations (found norm {norm}); enable normalize_representation"
            )));
        }
    }
    let m0 = mean_pairwise_inner(r0)?;
    let m_star = mean_pairwise_inner(r_star)?;
    Ok(CorollaryCheck {
        m0,
        m_star,
        tolerance,
        bound_ok: m_star <= COROLLARY_LIMIT + m0.abs() + tolerance,
    })
}

pub fn check_corollary1<I: ModelInput>(
    arch: &Architecture,
    theta0: &ParamSet<f64>,
    theta_star: &ParamSet<f64>,
    instances: &[I],
    tolerance: f64,
) -> Result<CorollaryCheck> {
    check_corollary1_reps(&reps(arch, theta0, instances)?, &reps(arch, theta_star, instances)?, tolerance)
}
