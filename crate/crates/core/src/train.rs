//! Backpropagation through time for the cell, plus the training loop.
//!
//! `backward` differentiates the combined sequence loss exactly: the
//! cross-entropy path through the softmax head, the cosine-distance paths
//! into both hidden states of each neighboring pair, the four beat-window
//! paths into the input gate, and the recurrent paths through every gate.
//! The standing finite-difference check (`gradcheck` module, criterion
//! tests) pins it to the forward pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adam::{adam_update, AdamConfig, AdamMoments};
use crate::cell::{forward_sequence, window_at, CellError, EmuParams, SeqForward};
use crate::encoding::{NoteSequence, ALPHABET_SIZE};
use crate::loss::{cross_entropy, LossBreakdown, LossError, COSINE_EPS, PROB_CLAMP};
use crate::num::{cast, Scalar};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Same-shape accumulators for every parameter tensor.
pub type Gradients<T> = EmuParams<T>;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("corpus has no usable sequences (length >= 2)")]
    EmptyCorpus,
    #[error("sequence of length {0} too short to train on")]
    SequenceTooShort(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Everything the training loop needs to be reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Trade-off between classification loss and cosine-distance loss.
    pub lambda: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub hidden: usize,
    pub seed: u64,
    /// Steps per training window; windows start from the zero state.
    pub unroll_length: usize,
    /// Global-norm gradient clip. Extra-paper stabilizer; `None` disables.
    pub grad_clip: Option<f64>,
    /// Adds per-gate bias vectors to the cell. Off in the default pipeline.
    pub gate_biases: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.5,
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            iterations: 2800,
            hidden: 70,
            seed: 0,
            unroll_length: 70,
            grad_clip: Some(5.0),
            gate_biases: false,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(TrainError::ShapeMismatch(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        let positives = [
            ("learning_rate", self.learning_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positives {
            if v <= 0.0 {
                return Err(TrainError::ShapeMismatch(format!("{} must be positive", name)));
            }
        }
        if self.batch_size == 0 || self.iterations == 0 || self.hidden == 0 || self.unroll_length < 2
        {
            return Err(TrainError::ShapeMismatch(
                "batch_size, iterations, hidden must be positive; unroll_length >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// Cosine distance between `u` and `v` together with its exact partials.
fn cosine_distance_grad<T: Scalar>(u: &[T], v: &[T]) -> (T, Vec<T>, Vec<T>) {
    let mut dot = T::zero();
    let mut uu = T::zero();
    let mut vv = T::zero();
    for (x, y) in u.iter().zip(v) {
        dot += *x * *y;
        uu += *x * *x;
        vv += *y * *y;
    }
    let nu = uu.sqrt();
    let nv = vv.sqrt();
    let denom = nu * nv + cast(COSINE_EPS);
    let d = T::one() - dot / denom;
    let scale = dot / (denom * denom);
    let mut du = vec![T::zero(); u.len()];
    let mut dv = vec![T::zero(); v.len()];
    for i in 0..u.len() {
        let u_hat = if nu > T::zero() { u[i] / nu } else { T::zero() };
        let v_hat = if nv > T::zero() { v[i] / nv } else { T::zero() };
        du[i] = -v[i] / denom + scale * nv * u_hat;
        dv[i] = -u[i] / denom + scale * nu * v_hat;
    }
    (d, du, dv)
}

/// Forward + reverse pass over one sequence. Returns the per-sequence loss
/// and the gradients of its total with respect to every tensor.
fn seq_backward<T: Scalar>(
    params: &EmuParams<T>,
    symbols: &[usize],
    lambda: T,
) -> Result<(LossBreakdown<T>, Gradients<T>), TrainError> {
    let t_len = symbols.len();
    if t_len < 2 {
        return Err(TrainError::SequenceTooShort(t_len));
    }
    let hidden = params.hidden();
    let fwd: SeqForward<T> = forward_sequence(params, symbols)?;
    let steps: T = cast((t_len - 1) as f64);
    let ce_weight = lambda / steps;
    let cd_weight = (T::one() - lambda) / steps;

    let mut grads = params.zeros_like();
    // Loss contributions flowing directly into each h_t (head + cosine).
    let mut dh_static: Vec<Vec<T>> = vec![vec![T::zero(); hidden]; t_len];

    // Prediction head: p_t predicts symbols[t+1].
    let mut l_e = T::zero();
    for t in 0..t_len - 1 {
        let target = symbols[t + 1];
        let p = &fwd.probs[t];
        l_e += cross_entropy(p, target)?;
        if ce_weight > T::zero() && p[target] > cast(PROB_CLAMP) {
            // d(total)/d(logits) = (λ/(T-1))·(p - onehot(target))
            let mut dlogits = vec![T::zero(); p.len()];
            for (k, dl) in dlogits.iter_mut().enumerate() {
                let y = if k == target { T::one() } else { T::zero() };
                *dl = ce_weight * (p[k] - y);
            }
            grads.w_p.add_outer(&dlogits, &fwd.states[t].h);
            for (b, dl) in grads.b_p.iter_mut().zip(&dlogits) {
                *b += *dl;
            }
            params.w_p.matvec_t_add(&dlogits, &mut dh_static[t]);
        }
    }
    l_e = l_e / steps;

    // Cosine pairs (h_{t-1}, h_t) for t = 1..T-1 (0-indexed).
    let mut l_d = T::zero();
    for t in 1..t_len {
        let (d, du, dv) = cosine_distance_grad(&fwd.states[t - 1].h, &fwd.states[t].h);
        l_d += d;
        if cd_weight > T::zero() {
            for i in 0..hidden {
                dh_static[t - 1][i] += cd_weight * du[i];
                dh_static[t][i] += cd_weight * dv[i];
            }
        }
    }
    l_d = l_d / steps;

    // Reverse pass through the recurrence.
    let zero = vec![T::zero(); hidden];
    let mut dh_carry = vec![T::zero(); hidden];
    let mut dc_carry = vec![T::zero(); hidden];
    for t in (0..t_len).rev() {
        let trace = &fwd.traces[t];
        let c_t = &fwd.states[t].c;
        let (h_prev, c_prev) = if t > 0 {
            (&fwd.states[t - 1].h, &fwd.states[t - 1].c)
        } else {
            (&zero, &zero)
        };

        let mut da_e = vec![T::zero(); hidden];
        let mut da_f = vec![T::zero(); hidden];
        let mut da_o = vec![T::zero(); hidden];
        let mut da_g = vec![T::zero(); hidden];
        let mut dc_next = vec![T::zero(); hidden];
        for i in 0..hidden {
            let dh = dh_static[t][i] + dh_carry[i];
            // h = o ⊙ c
            let d_o = dh * c_t[i];
            let dc = dh * trace.o[i] + dc_carry[i];
            // c = f ⊙ c_prev + e ⊙ g
            let d_e = dc * trace.g[i];
            let d_g = dc * trace.e[i];
            let d_f = dc * c_prev[i];
            dc_next[i] = dc * trace.f[i];
            da_e[i] = d_e * trace.e[i] * (T::one() - trace.e[i]);
            da_f[i] = d_f * trace.f[i] * (T::one() - trace.f[i]);
            da_o[i] = d_o * trace.o[i] * (T::one() - trace.o[i]);
            da_g[i] = d_g * (T::one() - trace.g[i] * trace.g[i]);
        }
        dc_carry = dc_next;

        let window = window_at(symbols, t);
        for (j, slot) in window.iter().enumerate() {
            if let Some(sym) = slot {
                grads.w_beat[j].add_to_col(*sym, &da_e);
            }
        }
        if let Some(x_t) = window[0] {
            grads.w_f.add_to_col(x_t, &da_f);
            grads.w_o.add_to_col(x_t, &da_o);
            grads.w_c.add_to_col(x_t, &da_g);
        }
        if t > 0 {
            grads.u_i.add_outer(&da_e, h_prev);
            grads.u_f.add_outer(&da_f, h_prev);
            grads.u_o.add_outer(&da_o, h_prev);
            grads.u_c.add_outer(&da_g, h_prev);
        }
        if let Some(b) = &mut grads.gate_biases {
            for i in 0..hidden {
                b.b_e[i] += da_e[i];
                b.b_f[i] += da_f[i];
                b.b_o[i] += da_o[i];
                b.b_c[i] += da_g[i];
            }
        }

        dh_carry = vec![T::zero(); hidden];
        params.u_i.matvec_t_add(&da_e, &mut dh_carry);
        params.u_f.matvec_t_add(&da_f, &mut dh_carry);
        params.u_o.matvec_t_add(&da_o, &mut dh_carry);
        params.u_c.matvec_t_add(&da_g, &mut dh_carry);
    }

    Ok((LossBreakdown::combine(l_e, l_d, lambda), grads))
}

/// Loss of a batch through the forward path only (no gradient machinery);
/// the finite-difference oracle differentiates this.
pub fn batch_loss<T: Scalar>(
    params: &EmuParams<T>,
    batch: &[&[usize]],
    lambda: T,
) -> Result<LossBreakdown<T>, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut l_e = T::zero();
    let mut l_d = T::zero();
    for symbols in batch {
        let t_len = symbols.len();
        if t_len < 2 {
            return Err(TrainError::SequenceTooShort(t_len));
        }
        let fwd = forward_sequence(params, symbols)?;
        let hidden_refs: Vec<&[T]> = fwd.states.iter().map(|s| s.h.as_slice()).collect();
        let breakdown = crate::loss::sequence_loss(
            &fwd.probs[..t_len - 1],
            &symbols[1..],
            &hidden_refs,
            lambda,
        )?;
        l_e += breakdown.l_e;
        l_d += breakdown.l_d;
    }
    let n: T = cast(batch.len() as f64);
    Ok(LossBreakdown::combine(l_e / n, l_d / n, lambda))
}

/// Gradients of the batch-mean total loss, reduced over sequences in
/// ascending index order regardless of scheduling.
pub fn backward<T: Scalar>(
    params: &EmuParams<T>,
    batch: &[&[usize]],
    lambda: T,
) -> Result<(LossBreakdown<T>, Gradients<T>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let per_seq: Vec<(LossBreakdown<T>, Gradients<T>)> = batch
        .par_iter()
        .map(|symbols| seq_backward(params, symbols, lambda))
        .collect::<Result<_, _>>()?;

    let n: T = cast(batch.len() as f64);
    let mut l_e = T::zero();
    let mut l_d = T::zero();
    let mut total = params.zeros_like();
    for (breakdown, grads) in &per_seq {
        l_e += breakdown.l_e;
        l_d += breakdown.l_d;
        let mut acc = total.tensors_mut();
        for (i, (_, g)) in grads.tensors().iter().enumerate() {
            let (_, out) = &mut acc[i];
            for (o, x) in out.iter_mut().zip(g.iter()) {
                *o += *x;
            }
        }
    }
    for (_, tensor) in total.tensors_mut() {
        for x in tensor {
            *x = *x / n;
        }
    }
    Ok((LossBreakdown::combine(l_e / n, l_d / n, lambda), total))
}

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm<T: Scalar>(grads: &mut Gradients<T>, max_norm: T) -> T {
    let mut sq = T::zero();
    for (_, tensor) in grads.tensors() {
        for x in tensor {
            sq += *x * *x;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for (_, tensor) in grads.tensors_mut() {
            for x in tensor {
                *x = *x * scale;
            }
        }
    }
    norm
}

/// A finished training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: EmuParams<T>,
    pub curve: Vec<LossBreakdown<T>>,
}

/// Trains from scratch on the corpus. Deterministic given the config seed.
pub fn train<T: Scalar>(
    config: &TrainConfig,
    corpus: &[NoteSequence],
) -> Result<TrainOutcome<T>, TrainError> {
    train_with(config, corpus, |_, _| {})
}

/// [`train`] with a per-iteration progress callback.
pub fn train_with<T: Scalar>(
    config: &TrainConfig,
    corpus: &[NoteSequence],
    mut progress: impl FnMut(usize, &LossBreakdown<T>),
) -> Result<TrainOutcome<T>, TrainError> {
    config.validate()?;
    let seqs: Vec<&[usize]> = corpus
        .iter()
        .filter(|s| s.len() >= 2)
        .map(|s| s.symbols.as_slice())
        .collect();
    if seqs.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }

    // Uniform sampling over (sequence, start-offset) pairs: offsets
    // 0..len-1 leave at least two steps in the window.
    let starts_per_seq: Vec<u64> = seqs.iter().map(|s| (s.len() - 1) as u64).collect();
    let mut cumulative = Vec::with_capacity(seqs.len());
    let mut total_pairs = 0u64;
    for n in &starts_per_seq {
        total_pairs += n;
        cumulative.push(total_pairs);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params: EmuParams<T> =
        EmuParams::init(config.hidden, ALPHABET_SIZE, config.gate_biases, &mut rng);
    let mut moments = AdamMoments::zeros_for(&params);
    let adam_cfg = config.adam();
    let lambda: T = cast(config.lambda);
    let mut curve = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let batch: Vec<&[usize]> = (0..config.batch_size)
            .map(|_| {
                let r = rng.gen_range(0..total_pairs);
                let si = cumulative.partition_point(|&c| c <= r);
                let offset = (r - if si > 0 { cumulative[si - 1] } else { 0 }) as usize;
                let seq = seqs[si];
                let end = (offset + config.unroll_length).min(seq.len());
                &seq[offset..end]
            })
            .collect();

        let (loss, mut grads) = backward(&params, &batch, lambda)?;
        if let Some(max_norm) = config.grad_clip {
            clip_global_norm(&mut grads, cast::<T>(max_norm));
        }
        adam_update(&mut params, &grads, &mut moments, &adam_cfg)?;

        if !loss.is_finite() || !params.is_finite() || !moments.is_finite() {
            return Err(TrainError::NonFinite { iteration });
        }
        progress(iteration, &loss);
        curve.push(loss);
    }

    Ok(TrainOutcome { params, curve })
}
