//! Central finite-difference verification of the analytic BPTT gradients.
//!
//! The comparison goes entry by entry over every parameter tensor: perturb,
//! re-run the forward-only batch loss, and hold the analytic value to
//! `|a - fd| / max(|a|, |fd|, 1e-8) < tolerance`. Runs in `f64` only; the
//! tolerances assume 64-bit arithmetic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cell::EmuParams;
use crate::num::mix64;
use crate::train::{backward, batch_loss, Gradients, TrainError};

/// Relative-error denominator floor.
///
/// A central difference at step 1e-6 carries irreducible f64 noise of about
/// 1e-10 absolute (roundoff ~ulp(L)/2h plus O(h^2) truncation), so entries
/// smaller than the floor are effectively compared absolutely: with the
/// 1e-5 tolerance the floor grants near-zero entries an absolute margin of
/// 1e-9, well above the noise and far below any real gradient bug.
pub const REL_ERR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckConfig {
    pub hidden: usize,
    pub alphabet: usize,
    pub seq_len: usize,
    pub batch_size: usize,
    pub instances: usize,
    pub lambdas: Vec<f64>,
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub gate_biases: bool,
    /// Test hook: deliberately corrupt one analytic gradient entry so the
    /// check must fail.
    pub corrupt: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            hidden: 5,
            alphabet: 7,
            seq_len: 6,
            batch_size: 1,
            instances: 3,
            lambdas: vec![0.0, 0.5, 1.0],
            step: 1e-6,
            tolerance: 1e-5,
            seed: 0,
            gate_biases: false,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceReport {
    pub hidden: usize,
    pub alphabet: usize,
    pub seq_len: usize,
    pub lambda: f64,
    pub seed: u64,
    pub max_rel_err: f64,
    pub worst_entry: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub instances: Vec<InstanceReport>,
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Central finite differences of the batch-mean total loss for every tensor
/// entry. Uses only the forward path.
pub fn finite_difference_grads(
    params: &EmuParams<f64>,
    batch: &[&[usize]],
    lambda: f64,
    step: f64,
) -> Result<Gradients<f64>, TrainError> {
    let mut work = params.clone();
    let mut fd = params.zeros_like();
    let n_tensors = params.tensors().len();
    for ti in 0..n_tensors {
        let len = params.tensors()[ti].1.len();
        for k in 0..len {
            let original = work.tensors()[ti].1[k];
            work.tensors_mut()[ti].1[k] = original + step;
            let plus = batch_loss(&work, batch, lambda)?.total;
            work.tensors_mut()[ti].1[k] = original - step;
            let minus = batch_loss(&work, batch, lambda)?.total;
            work.tensors_mut()[ti].1[k] = original;
            fd.tensors_mut()[ti].1[k] = (plus - minus) / (2.0 * step);
        }
    }
    Ok(fd)
}

/// Largest relative error between two gradient sets, with its location.
pub fn max_relative_error(a: &Gradients<f64>, b: &Gradients<f64>) -> (f64, String) {
    max_relative_error_floored(a, b, REL_ERR_FLOOR)
}

/// Same comparison with an explicit denominator floor.
pub fn max_relative_error_floored(
    a: &Gradients<f64>,
    b: &Gradients<f64>,
    floor: f64,
) -> (f64, String) {
    let mut worst = 0.0;
    let mut at = String::from("-");
    for ((name, ta), (_, tb)) in a.tensors().iter().zip(b.tensors().iter()) {
        for (k, (x, y)) in ta.iter().zip(tb.iter()).enumerate() {
            let denom = x.abs().max(y.abs()).max(floor);
            let rel = (x - y).abs() / denom;
            if rel > worst {
                worst = rel;
                at = format!("{}[{}]", name, k);
            }
        }
    }
    (worst, at)
}

/// Richardson-extrapolated central differences: combines steps `h` and
/// `h/2` to cancel the O(h^2) truncation term, leaving ~1e-12 absolute
/// noise. Used to pin the analytic gradient absolutely.
pub fn richardson_grads(
    params: &EmuParams<f64>,
    batch: &[&[usize]],
    lambda: f64,
    step: f64,
) -> Result<Gradients<f64>, TrainError> {
    let coarse = finite_difference_grads(params, batch, lambda, step)?;
    let fine = finite_difference_grads(params, batch, lambda, step / 2.0)?;
    let mut out = params.zeros_like();
    let mut tensors = out.tensors_mut();
    for (i, ((_, c), (_, f))) in coarse.tensors().iter().zip(fine.tensors().iter()).enumerate() {
        let (_, o) = &mut tensors[i];
        for (k, x) in o.iter_mut().enumerate() {
            *x = (4.0 * f[k] - c[k]) / 3.0;
        }
    }
    drop(tensors);
    Ok(out)
}

/// Largest absolute difference between two gradient sets, with location.
pub fn max_absolute_error(a: &Gradients<f64>, b: &Gradients<f64>) -> (f64, String) {
    let mut worst = 0.0;
    let mut at = String::from("-");
    for ((name, ta), (_, tb)) in a.tensors().iter().zip(b.tensors().iter()) {
        for (k, (x, y)) in ta.iter().zip(tb.iter()).enumerate() {
            let abs = (x - y).abs();
            if abs > worst {
                worst = abs;
                at = format!("{}[{}]", name, k);
            }
        }
    }
    (worst, at)
}

/// Builds one random instance and compares analytic BPTT against central
/// finite differences.
#[allow(clippy::too_many_arguments)]
pub fn check_instance(
    hidden: usize,
    alphabet: usize,
    seq_len: usize,
    batch_size: usize,
    gate_biases: bool,
    lambda: f64,
    step: f64,
    tolerance: f64,
    seed: u64,
    corrupt: bool,
) -> Result<InstanceReport, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = EmuParams::<f64>::init(hidden, alphabet, gate_biases, &mut rng);
    if let Some(b) = &mut params.gate_biases {
        for v in [&mut b.b_e, &mut b.b_f, &mut b.b_o, &mut b.b_c] {
            for x in v.iter_mut() {
                *x = rng.gen_range(-0.5..0.5);
            }
        }
    }
    let sequences: Vec<Vec<usize>> = (0..batch_size.max(1))
        .map(|_| (0..seq_len).map(|_| rng.gen_range(0..alphabet)).collect())
        .collect();
    let batch: Vec<&[usize]> = sequences.iter().map(|s| s.as_slice()).collect();

    let (_, mut analytic) = backward(&params, &batch, lambda)?;
    if corrupt {
        analytic.b_p[0] += 0.5;
    }
    let fd = finite_difference_grads(&params, &batch, lambda, step)?;
    let (max_rel_err, worst_entry) = max_relative_error(&analytic, &fd);
    Ok(InstanceReport {
        hidden,
        alphabet,
        seq_len,
        lambda,
        seed,
        max_rel_err,
        worst_entry,
        pass: max_rel_err < tolerance,
    })
}

/// Runs the whole configured comparison: `instances` random seeds, each at
/// every λ in the list.
pub fn run(config: &GradCheckConfig) -> Result<GradCheckReport, TrainError> {
    let mut instances = Vec::new();
    for i in 0..config.instances {
        let seed = mix64(config.seed.wrapping_add(i as u64));
        for &lambda in &config.lambdas {
            instances.push(check_instance(
                config.hidden,
                config.alphabet,
                config.seq_len,
                config.batch_size,
                config.gate_biases,
                lambda,
                config.step,
                config.tolerance,
                seed,
                config.corrupt,
            )?);
        }
    }
    let max_rel_err = instances.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    let pass = instances.iter().all(|r| r.pass);
    Ok(GradCheckReport {
        instances,
        max_rel_err,
        pass,
    })
}
