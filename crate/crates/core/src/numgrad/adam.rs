use crate::error::{Error, Result};

use super::{NamedTensors, Scalar};

/// Adaptive-moment optimizer state with bias correction.
#[derive(Debug, Clone)]
pub struct OptimizerState<S> {
    pub step_count: u64,
    pub first_moment: NamedTensors<S>,
    pub second_moment: NamedTensors<S>,
    pub learning_rate: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
}

impl<S: Scalar> OptimizerState<S> {
    /// Zero moments shaped like `params`, with beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(params: &NamedTensors<S>, learning_rate: S) -> Result<Self> {
        Self::with_hyperparameters(params, learning_rate, S::of(0.9), S::of(0.999), S::of(1e-8))
    }

    pub fn with_hyperparameters(
        params: &NamedTensors<S>,
        learning_rate: S,
        beta1: S,
        beta2: S,
        epsilon: S,
    ) -> Result<Self> {
        let unit = |b: S| b > S::zero() && b < S::one();
        if !unit(beta1) || !unit(beta2) {
            return Err(Error::input("adam betas must lie in (0, 1)"));
        }
        if epsilon <= S::zero() || learning_rate <= S::zero() {
            return Err(Error::input("adam epsilon and learning rate must be positive"));
        }
        Ok(OptimizerState {
            step_count: 0,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            learning_rate,
            beta1,
            beta2,
            epsilon,
        })
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step<S: Scalar>(
    params: &mut NamedTensors<S>,
    grads: &NamedTensors<S>,
    state: &mut OptimizerState<S>,
) -> Result<()> {
    params.check_same_layout(grads)?;
    params.check_same_layout(&state.first_moment)?;
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = S::one() - b1.powi(t);
    let correction2 = S::one() - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;

    for ((name, p), (_, g)) in params.iter_mut().zip(grads.iter()) {
        let m = state
            .first_moment
            .get_mut(name)
            .expect("layout checked")
            .data_mut();
        let v = state
            .second_moment
            .get_mut(name)
            .expect("layout checked")
            .data_mut();
        for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *mi = b1 * *mi + (S::one() - b1) * gi;
            *vi = b2 * *vi + (S::one() - b2) * gi * gi;
            let m_hat = *mi / correction1;
            let v_hat = *vi / correction2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrad::Tensor;

    fn single(name: &str, v: f64) -> NamedTensors<f64> {
        let mut p = NamedTensors::new();
        p.insert(name, Tensor::scalar(v));
        p
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = single("w", 0.0);
        let grads = single("w", 0.1);
        let mut state = OptimizerState::new(&params, 1e-3).unwrap();
        adam_step(&mut params, &grads, &mut state).unwrap();
        let update = params.get("w").unwrap().data()[0];
        let expected = -1e-3 * 0.1 / (0.1 + 1e-8);
        assert!((update - expected).abs() < 1e-15);
        assert!((update + 1e-3).abs() < 1e-9);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut params = single("w", 0.75);
        let before = params.clone();
        let grads = single("w", 0.0);
        let mut state = OptimizerState::new(&params, 1e-3).unwrap();
        for _ in 0..3 {
            adam_step(&mut params, &grads, &mut state).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.first_moment.get("w").unwrap().data(), &[0.0]);
        assert_eq!(state.second_moment.get("w").unwrap().data(), &[0.0]);
    }

    #[test]
    fn two_steps_decrease_quadratic() {
        let f = |w: f64| w * w;
        let mut params = single("w", 1.0);
        let mut state = OptimizerState::new(&params, 1e-2).unwrap();
        let mut values = vec![f(1.0)];
        for _ in 0..2 {
            let w = params.get("w").unwrap().data()[0];
            let grads = single("w", 2.0 * w);
            adam_step(&mut params, &grads, &mut state).unwrap();
            values.push(f(params.get("w").unwrap().data()[0]));
        }
        assert!(values[1] < values[0] && values[2] < values[1], "{values:?}");
    }

    #[test]
    fn rejects_layout_mismatch_and_bad_betas() {
        let mut params = single("w", 1.0);
        let mut state = OptimizerState::new(&params, 1e-3).unwrap();
        assert!(matches!(
            adam_step(&mut params, &single("v", 1.0), &mut state),
            Err(Error::Shape(_))
        ));
        assert!(OptimizerState::with_hyperparameters(&params, 1e-3, 1.0, 0.999, 1e-8).is_err());
    }
}
