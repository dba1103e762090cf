//! Adam with bias correction, applied tensor-by-tensor to the cell params.

use serde::{Deserialize, Serialize};

use crate::cell::EmuParams;
use crate::num::{cast, Scalar};
use crate::train::TrainError;

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates, one flat tensor per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamMoments<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step_count: u64,
}

impl<T: Scalar> AdamMoments<T> {
    pub fn zeros_for(params: &EmuParams<T>) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
        AdamMoments {
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step_count: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m
            .iter()
            .chain(self.v.iter())
            .all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// One bias-corrected Adam step:
/// `m ← β₁m + (1-β₁)g`, `v ← β₂v + (1-β₂)g²`,
/// `θ ← θ - lr·m̂/(√v̂ + ε)` with `m̂ = m/(1-β₁ᵗ)`, `v̂ = v/(1-β₂ᵗ)`.
pub fn adam_update<T: Scalar>(
    params: &mut EmuParams<T>,
    grads: &EmuParams<T>,
    moments: &mut AdamMoments<T>,
    config: &AdamConfig,
) -> Result<(), TrainError> {
    let grad_tensors = grads.tensors();
    let mut param_tensors = params.tensors_mut();
    if grad_tensors.len() != param_tensors.len() || grad_tensors.len() != moments.m.len() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} gradient tensors vs {} parameter tensors",
            grad_tensors.len(),
            param_tensors.len()
        )));
    }

    moments.step_count += 1;
    let t = moments.step_count as i32;
    let lr: T = cast(config.learning_rate);
    let beta1: T = cast(config.beta1);
    let beta2: T = cast(config.beta2);
    let eps: T = cast(config.epsilon);
    let bias1 = T::one() - beta1.powi(t);
    let bias2 = T::one() - beta2.powi(t);

    for (i, (name, grad)) in grad_tensors.iter().enumerate() {
        let (_, theta) = &mut param_tensors[i];
        if grad.len() != theta.len() {
            return Err(TrainError::ShapeMismatch(format!(
                "tensor {}: {} gradient entries vs {} parameters",
                name,
                grad.len(),
                theta.len()
            )));
        }
        let m = &mut moments.m[i];
        let v = &mut moments.v[i];
        for k in 0..grad.len() {
            let g = grad[k];
            m[k] = beta1 * m[k] + (T::one() - beta1) * g;
            v[k] = beta2 * v[k] + (T::one() - beta2) * g * g;
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            theta[k] = theta[k] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(value: f64) -> EmuParams<f64> {
        let mut p = EmuParams::<f64>::zeros(1, 1);
        p.b_p[0] = value;
        p
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = scalar_params(0.0);
        let mut grads = EmuParams::<f64>::zeros(1, 1);
        grads.b_p[0] = 0.37;
        let mut moments = AdamMoments::zeros_for(&params);
        let cfg = AdamConfig { learning_rate: 0.01, ..AdamConfig::default() };
        adam_update(&mut params, &grads, &mut moments, &cfg).unwrap();
        // Bias correction makes m̂ = g and v̂ = g², so the move is lr·g/(|g|+ε).
        let expected = -0.01 * 0.37 / (0.37 + 1e-8);
        assert!((params.b_p[0] - expected).abs() < 1e-15);
        assert!((params.b_p[0].abs() - 0.01).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = scalar_params(1.5);
        let grads = EmuParams::<f64>::zeros(1, 1);
        let mut moments = AdamMoments::zeros_for(&params);
        let cfg = AdamConfig::default();
        for _ in 0..3 {
            adam_update(&mut params, &grads, &mut moments, &cfg).unwrap();
        }
        assert_eq!(params.b_p[0], 1.5);
        assert!(moments.m.iter().all(|t| t.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn two_constant_steps_match_hand_recurrence() {
        let lr = 0.1;
        let g = 0.5;
        let cfg = AdamConfig { learning_rate: lr, ..AdamConfig::default() };
        let mut params = scalar_params(1.0);
        let mut grads = EmuParams::<f64>::zeros(1, 1);
        grads.b_p[0] = g;
        let mut moments = AdamMoments::zeros_for(&params);
        adam_update(&mut params, &grads, &mut moments, &cfg).unwrap();
        adam_update(&mut params, &grads, &mut moments, &cfg).unwrap();

        // Hand-computed recurrence.
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut theta = 1.0;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - f64::powi(b1, t));
            let v_hat = v / (1.0 - f64::powi(b2, t));
            theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        assert!((params.b_p[0] - theta).abs() < 1e-15);
        // Both steps have m̂ = g and v̂ = g², so θ = 1 - 2·lr·g/(|g|+ε).
        let closed_form = 1.0 - 2.0 * lr * g / (g + eps);
        assert!((params.b_p[0] - closed_form).abs() < 1e-12);
    }

    #[test]
    fn update_magnitude_stays_within_ten_learning_rates() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let cfg = AdamConfig::default();
        let mut params = scalar_params(0.0);
        let mut moments = AdamMoments::zeros_for(&params);
        let mut prev = params.b_p[0];
        for step in 0..200 {
            let mut grads = EmuParams::<f64>::zeros(1, 1);
            // Adversarial scale flips between huge and tiny gradients.
            let scale = if step % 7 < 3 { 1e4 } else { 1e-6 };
            grads.b_p[0] = rng.gen_range(-1.0..1.0) * scale;
            adam_update(&mut params, &grads, &mut moments, &cfg).unwrap();
            let delta = (params.b_p[0] - prev).abs();
            assert!(
                delta <= 10.0 * cfg.learning_rate,
                "step {}: delta {} exceeds 10·lr",
                step,
                delta
            );
            prev = params.b_p[0];
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = EmuParams::<f64>::zeros(2, 3);
        let grads = EmuParams::<f64>::zeros(3, 3);
        let mut moments = AdamMoments::zeros_for(&params);
        let err = adam_update(&mut params, &grads, &mut moments, &AdamConfig::default());
        assert!(matches!(err, Err(TrainError::ShapeMismatch(_))));
    }
}
