//! Training objective: next-note cross-entropy plus a cosine-distance term
//! between consecutive hidden states, combined as
//! `total = λ·l_e + (1-λ)·l_d`.
//!
//! The cosine term rewards neighboring hidden states for pointing in
//! different directions, which counters the dominance of the holding state
//! in the data. Both terms are averaged over time so λ trades them off
//! independently of sequence length.

use thiserror::Error;

use crate::num::{cast, Scalar};

/// Floor applied to probabilities before taking the log.
pub const PROB_CLAMP: f64 = 1e-12;
/// Guard added to the cosine-distance denominator.
pub const COSINE_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("target {target} out of range for {classes} classes")]
    OutOfRange { target: usize, classes: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

/// Per-sequence (or per-batch) loss values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    /// Mean cross-entropy of the next-note predictions.
    pub l_e: T,
    /// Mean cosine distance between consecutive hidden states, in [0, 2].
    pub l_d: T,
    pub total: T,
    pub lambda: T,
}

impl<T: Scalar> LossBreakdown<T> {
    pub fn combine(l_e: T, l_d: T, lambda: T) -> Self {
        LossBreakdown {
            l_e,
            l_d,
            total: lambda * l_e + (T::one() - lambda) * l_d,
            lambda,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_e.is_finite() && self.l_d.is_finite() && self.total.is_finite()
    }
}

/// `-log(p[target])`, with `p[target]` clamped to at least [`PROB_CLAMP`].
pub fn cross_entropy<T: Scalar>(p: &[T], target: usize) -> Result<T, LossError> {
    if target >= p.len() {
        return Err(LossError::OutOfRange {
            target,
            classes: p.len(),
        });
    }
    let clamped = p[target].max(cast(PROB_CLAMP));
    Ok(-clamped.ln())
}

/// `1 - ⟨a, b⟩ / (‖a‖‖b‖ + ε)`. Zero vectors yield exactly 1.
pub fn cosine_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len(), "cosine distance needs equal lengths");
    let mut dot = T::zero();
    let mut na = T::zero();
    let mut nb = T::zero();
    for (x, y) in a.iter().zip(b) {
        dot += *x * *y;
        na += *x * *x;
        nb += *y * *y;
    }
    let denom = na.sqrt() * nb.sqrt() + cast(COSINE_EPS);
    T::one() - dot / denom
}

/// Combines per-step distributions and hidden states into the sequence loss.
///
/// `probs[t]` predicts `targets[t]` (the symbol at position t+1), so both
/// have `T-1` entries while `hidden` has all `T` states.
pub fn sequence_loss<T: Scalar>(
    probs: &[Vec<T>],
    targets: &[usize],
    hidden: &[&[T]],
    lambda: T,
) -> Result<LossBreakdown<T>, LossError> {
    if probs.len() != targets.len() {
        return Err(LossError::LengthMismatch(format!(
            "{} distributions vs {} targets",
            probs.len(),
            targets.len()
        )));
    }
    if hidden.len() != probs.len() + 1 || hidden.len() < 2 {
        return Err(LossError::LengthMismatch(format!(
            "{} hidden states for {} predictions",
            hidden.len(),
            probs.len()
        )));
    }
    let steps = cast::<T>(probs.len() as f64);
    let mut l_e = T::zero();
    for (p, &target) in probs.iter().zip(targets) {
        l_e += cross_entropy(p, target)?;
    }
    l_e = l_e / steps;

    let mut l_d = T::zero();
    for pair in hidden.windows(2) {
        l_d += cosine_distance(pair[0], pair[1]);
    }
    l_d = l_d / steps;

    Ok(LossBreakdown::combine(l_e, l_d, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_cross_entropy_is_log_alphabet() {
        let p = vec![1.0 / 35.0; 35];
        for target in [0usize, 17, 34] {
            let ce = cross_entropy(&p, target).unwrap();
            assert!((ce - 35.0_f64.ln()).abs() < 1e-12);
            assert!((ce - 3.5553480614894135).abs() < 1e-9);
        }
    }

    #[test]
    fn certain_prediction_has_zero_loss() {
        let mut p = vec![0.0f64; 5];
        p[2] = 1.0;
        assert_eq!(cross_entropy(&p, 2).unwrap(), 0.0);
        // Elsewhere the clamp keeps the value finite.
        let ce = cross_entropy(&p, 0).unwrap();
        assert!(ce.is_finite() && ce > 0.0);
    }

    #[test]
    fn hand_value_and_range_checks() {
        let p = vec![0.7f64, 0.2, 0.1];
        let ce = cross_entropy(&p, 1).unwrap();
        assert!((ce - 1.6094379124341003).abs() < 1e-12);
        assert!(ce >= 0.0);
        assert_eq!(
            cross_entropy(&p, 3),
            Err(LossError::OutOfRange { target: 3, classes: 3 })
        );
    }

    #[test]
    fn cosine_distance_identities() {
        let u = [0.3f64, -1.0, 2.0];
        assert!(cosine_distance(&u, &u).abs() < 1e-9);
        let a = [1.0f64, 0.0];
        let b = [0.0f64, 2.0];
        assert!((cosine_distance(&a, &b) - 1.0).abs() < 1e-9);
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        assert!((cosine_distance(&u, &neg) - 2.0).abs() < 1e-9);
        assert_eq!(cosine_distance::<f64>(&[0.0, 0.0], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn cosine_distance_is_scale_invariant() {
        let u = [0.5, -0.1, 0.8, 2.0];
        let v = [-0.4, 0.9, 0.2, 1.0];
        let base = cosine_distance(&u, &v);
        for (alpha, beta) in [(2.0, 3.0), (0.01, 5.0), (1e3, 1e-3)] {
            let su: Vec<f64> = u.iter().map(|x| alpha * x).collect();
            let sv: Vec<f64> = v.iter().map(|x| beta * x).collect();
            assert!((cosine_distance(&su, &sv) - base).abs() < 1e-9);
        }
    }

    #[test]
    fn lambda_endpoints_select_single_terms() {
        let probs = vec![vec![0.5, 0.5], vec![0.9, 0.1]];
        let targets = vec![0, 1];
        let h0 = [1.0, 0.0];
        let h1 = [0.0, 1.0];
        let h2 = [1.0, 1.0];
        let hidden: Vec<&[f64]> = vec![&h0, &h1, &h2];
        let at_one = sequence_loss(&probs, &targets, &hidden, 1.0).unwrap();
        assert_eq!(at_one.total, at_one.l_e);
        let at_zero = sequence_loss(&probs, &targets, &hidden, 0.0).unwrap();
        assert_eq!(at_zero.total, at_zero.l_d);
    }

    #[test]
    fn three_step_toy_matches_hand_computation() {
        // T = 3: two predictions, three hidden states.
        let probs = vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.3, 0.1]];
        let targets = vec![2usize, 0];
        let h0 = [1.0, 0.0];
        let h1 = [1.0, 1.0];
        let h2 = [0.0, 2.0];
        let hidden: Vec<&[f64]> = vec![&h0, &h1, &h2];

        let l_e = (-(0.5_f64.ln()) + -(0.6_f64.ln())) / 2.0;
        // cos(h0,h1) = 1/√2; cos(h1,h2) = 2/(√2·2) = 1/√2.
        let l_d = ((1.0 - 1.0 / 2.0_f64.sqrt()) + (1.0 - 1.0 / 2.0_f64.sqrt())) / 2.0;
        let out = sequence_loss(&probs, &targets, &hidden, 0.4).unwrap();
        assert!((out.l_e - l_e).abs() < 1e-12);
        assert!((out.l_d - l_d).abs() < 1e-9);
        assert!((out.total - (0.4 * l_e + 0.6 * l_d)).abs() < 1e-12);
    }

    #[test]
    fn total_is_linear_in_lambda() {
        let probs = vec![vec![0.25, 0.75], vec![0.1, 0.9]];
        let targets = vec![1usize, 1];
        let h0 = [0.5, 0.2];
        let h1 = [-0.3, 0.9];
        let h2 = [1.5, 0.1];
        let hidden: Vec<&[f64]> = vec![&h0, &h1, &h2];
        let base = sequence_loss(&probs, &targets, &hidden, 0.0).unwrap();
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let out = sequence_loss(&probs, &targets, &hidden, lambda).unwrap();
            let expected = lambda * base.l_e + (1.0 - lambda) * base.l_d;
            assert!((out.total - expected).abs() < 1e-12);
            assert!(out.l_d >= 0.0 && out.l_d <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let probs = vec![vec![1.0]];
        let h0 = [1.0];
        let hidden: Vec<&[f64]> = vec![&h0];
        assert!(matches!(
            sequence_loss(&probs, &[0, 0], &hidden, 0.5),
            Err(LossError::LengthMismatch(_))
        ));
        assert!(matches!(
            sequence_loss(&probs, &[0], &hidden, 0.5),
            Err(LossError::LengthMismatch(_))
        ));
    }
}
