use crate::error::{Error, Result};
use crate::numgrad::Scalar;

use super::network::{is_head, ParamSet};

fn included(name: &str, exclude_head: bool) -> bool {
    !(exclude_head && is_head(name))
}

/// `‖a − b‖_F` over all tensors, optionally skipping the head.
pub fn frobenius_distance<S: Scalar>(a: &ParamSet<S>, b: &ParamSet<S>, exclude_head: bool) -> Result<S> {
    a.check_same_layout(b)
        .map_err(|e| Error::input(format!("parameter sets differ: {e}")))?;
    let mut total = S::zero();
    for ((name, ta), (_, tb)) in a.iter().zip(b.iter()) {
        if !included(name, exclude_head) {
            continue;
        }
        for (&x, &y) in ta.data().iter().zip(tb.data()) {
            let d = x - y;
            total += d * d;
        }
    }
    Ok(total.sqrt())
}

/// Radial projection of `theta` onto the Frobenius ball of radius `gamma` around `theta0`.
///
/// Head tensors are left untouched when `exclude_head` is set.
pub fn project_to_ball<S: Scalar>(
    theta: &ParamSet<S>,
    theta0: &ParamSet<S>,
    gamma: S,
    exclude_head: bool,
) -> Result<ParamSet<S>> {
    let mut out = theta.clone();
    project_in_place(&mut out, theta0, gamma, exclude_head)?;
    Ok(out)
}

/// In-place variant of [`project_to_ball`]; returns the distance before projection.
pub fn project_in_place<S: Scalar>(
    theta: &mut ParamSet<S>,
    theta0: &ParamSet<S>,
    gamma: S,
    exclude_head: bool,
) -> Result<S> {
    if gamma <= S::zero() {
        return Err(Error::input("projection radius must be positive"));
    }
    let d = frobenius_distance(theta, theta0, exclude_head)?;
    if d <= gamma {
        return Ok(d);
    }
    let factor = gamma / d;
    for ((name, t), (_, t0)) in theta.iter_mut().zip(theta0.iter()) {
        if !included(name, exclude_head) {
            continue;
        }
        for (v, &v0) in t.data_mut().iter_mut().zip(t0.data()) {
            *v = v0 + (*v - v0) * factor;
        }
    }
    Ok(d)
}
