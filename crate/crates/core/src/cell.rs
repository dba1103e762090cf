//! The Enhanced Memory Unit: an LSTM-style cell whose input gate aggregates a
//! full beat of note encodings (the current note plus the three before it),
//! each with its own trained matrix.
//!
//! The recurrence, per step:
//!
//! ```text
//! e_t = σ(Σ_{j=0..3} W_beat[j]·x_{t-j} + U_i·h_{t-1})
//! f_t = σ(W_f·x_t + U_f·h_{t-1})
//! o_t = σ(W_o·x_t + U_o·h_{t-1})
//! c_t = f_t ⊙ c_{t-1} + e_t ⊙ tanh(W_c·x_t + U_c·h_{t-1})
//! h_t = o_t ⊙ c_t
//! ```
//!
//! Two deliberate departures from the textbook LSTM, kept as-is throughout:
//! the gates carry no bias terms by default, and `h_t` is `o_t ⊙ c_t` with no
//! tanh squashing, so the hidden state is not bounded to (-1, 1). An optional
//! gate-bias extension exists behind [`EmuParams::init`]'s flag; the default
//! pipeline never enables it.
//!
//! Inputs are one-hot note encodings, represented here by their symbol index;
//! positions before the start of a sequence are zero vectors, represented by
//! `None`.

use rand::Rng;
use thiserror::Error;

use crate::mat::Matrix;
use crate::num::{cast, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum CellError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty sequence")]
    EmptySequence,
}

/// Input window for one step: `[x_t, x_{t-1}, x_{t-2}, x_{t-3}]` as one-hot
/// indices, `None` where the position precedes the sequence start.
pub type NoteWindow = [Option<usize>; 4];

/// Builds the window for 0-indexed step `t` of `symbols`.
pub fn window_at(symbols: &[usize], t: usize) -> NoteWindow {
    let mut w: NoteWindow = [None; 4];
    for (j, slot) in w.iter_mut().enumerate() {
        if t >= j {
            *slot = Some(symbols[t - j]);
        }
    }
    w
}

/// Optional per-gate bias vectors (off in the default configuration).
#[derive(Debug, Clone, PartialEq)]
pub struct GateBiases<T> {
    pub b_e: Vec<T>,
    pub b_f: Vec<T>,
    pub b_o: Vec<T>,
    pub b_c: Vec<T>,
}

/// All trainable tensors of the cell plus the output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct EmuParams<T> {
    hidden: usize,
    alphabet: usize,
    /// Beat-window input matrices, indexed by relative offset:
    /// `w_beat[0]` applies to the current note, `w_beat[3]` to `x_{t-3}`.
    pub w_beat: [Matrix<T>; 4],
    pub u_i: Matrix<T>,
    pub w_f: Matrix<T>,
    pub u_f: Matrix<T>,
    pub w_o: Matrix<T>,
    pub u_o: Matrix<T>,
    pub w_c: Matrix<T>,
    pub u_c: Matrix<T>,
    /// Output projection to next-note logits, `alphabet × hidden`.
    pub w_p: Matrix<T>,
    pub b_p: Vec<T>,
    pub gate_biases: Option<GateBiases<T>>,
}

impl<T: Scalar> EmuParams<T> {
    pub fn zeros(hidden: usize, alphabet: usize) -> Self {
        let ha = || Matrix::zeros(hidden, alphabet);
        let hh = || Matrix::zeros(hidden, hidden);
        EmuParams {
            hidden,
            alphabet,
            w_beat: [ha(), ha(), ha(), ha()],
            u_i: hh(),
            w_f: ha(),
            u_f: hh(),
            w_o: ha(),
            u_o: hh(),
            w_c: ha(),
            u_c: hh(),
            w_p: Matrix::zeros(alphabet, hidden),
            b_p: vec![T::zero(); alphabet],
            gate_biases: None,
        }
    }

    /// Seeded initialization: every weight matrix uniform in
    /// `[-1/√hidden, 1/√hidden)`, bias vectors zero. Tensors are sampled in
    /// the canonical (checkpoint) order so a given seed always produces the
    /// same parameters.
    pub fn init<R: Rng>(hidden: usize, alphabet: usize, gate_biases: bool, rng: &mut R) -> Self {
        let bound: T = T::one() / cast::<T>(hidden as f64).sqrt();
        let ha = |rng: &mut R| Matrix::sample_uniform(hidden, alphabet, bound, rng);
        let hh = |rng: &mut R| Matrix::sample_uniform(hidden, hidden, bound, rng);
        EmuParams {
            hidden,
            alphabet,
            w_beat: [ha(rng), ha(rng), ha(rng), ha(rng)],
            u_i: hh(rng),
            w_f: ha(rng),
            u_f: hh(rng),
            w_o: ha(rng),
            u_o: hh(rng),
            w_c: ha(rng),
            u_c: hh(rng),
            w_p: Matrix::sample_uniform(alphabet, hidden, bound, rng),
            b_p: vec![T::zero(); alphabet],
            gate_biases: gate_biases.then(|| GateBiases {
                b_e: vec![T::zero(); hidden],
                b_f: vec![T::zero(); hidden],
                b_o: vec![T::zero(); hidden],
                b_c: vec![T::zero(); hidden],
            }),
        }
    }

    /// Same-shape zero tensors, used as gradient accumulators.
    pub fn zeros_like(&self) -> Self {
        let mut z = EmuParams::zeros(self.hidden, self.alphabet);
        if let Some(b) = &self.gate_biases {
            z.gate_biases = Some(GateBiases {
                b_e: vec![T::zero(); b.b_e.len()],
                b_f: vec![T::zero(); b.b_f.len()],
                b_o: vec![T::zero(); b.b_o.len()],
                b_c: vec![T::zero(); b.b_c.len()],
            });
        }
        z
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Flat views of every tensor in canonical order.
    pub fn tensors(&self) -> Vec<(&'static str, &[T])> {
        let mut list: Vec<(&'static str, &[T])> = vec![
            ("w_beat0", self.w_beat[0].as_slice()),
            ("w_beat1", self.w_beat[1].as_slice()),
            ("w_beat2", self.w_beat[2].as_slice()),
            ("w_beat3", self.w_beat[3].as_slice()),
            ("u_i", self.u_i.as_slice()),
            ("w_f", self.w_f.as_slice()),
            ("u_f", self.u_f.as_slice()),
            ("w_o", self.w_o.as_slice()),
            ("u_o", self.u_o.as_slice()),
            ("w_c", self.w_c.as_slice()),
            ("u_c", self.u_c.as_slice()),
            ("w_p", self.w_p.as_slice()),
            ("b_p", &self.b_p),
        ];
        if let Some(b) = &self.gate_biases {
            list.push(("b_e", &b.b_e));
            list.push(("b_f", &b.b_f));
            list.push(("b_o", &b.b_o));
            list.push(("b_c", &b.b_c));
        }
        list
    }

    /// Mutable flat views, same order as [`EmuParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        let [b0, b1, b2, b3] = &mut self.w_beat;
        let mut list: Vec<(&'static str, &mut [T])> = vec![
            ("w_beat0", b0.as_mut_slice()),
            ("w_beat1", b1.as_mut_slice()),
            ("w_beat2", b2.as_mut_slice()),
            ("w_beat3", b3.as_mut_slice()),
            ("u_i", self.u_i.as_mut_slice()),
            ("w_f", self.w_f.as_mut_slice()),
            ("u_f", self.u_f.as_mut_slice()),
            ("w_o", self.w_o.as_mut_slice()),
            ("u_o", self.u_o.as_mut_slice()),
            ("w_c", self.w_c.as_mut_slice()),
            ("u_c", self.u_c.as_mut_slice()),
            ("w_p", self.w_p.as_mut_slice()),
            ("b_p", &mut self.b_p),
        ];
        if let Some(b) = &mut self.gate_biases {
            list.push(("b_e", &mut b.b_e));
            list.push(("b_f", &mut b.b_f));
            list.push(("b_o", &mut b.b_o));
            list.push(("b_c", &mut b.b_c));
        }
        list
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// Copy with `w_beat[1..=3]` zeroed: the single-input control cell whose
    /// forward pass ignores everything but the current note.
    pub fn reduce_to_lstm_variant(&self) -> Self {
        let mut reduced = self.clone();
        for m in &mut reduced.w_beat[1..] {
            m.fill(T::zero());
        }
        reduced
    }
}

/// Recurrent state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EmuState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> EmuState<T> {
    pub fn zeros(hidden: usize) -> Self {
        EmuState {
            h: vec![T::zero(); hidden],
            c: vec![T::zero(); hidden],
        }
    }
}

/// Gate activations recorded by a step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace<T> {
    pub e: Vec<T>,
    pub f: Vec<T>,
    pub o: Vec<T>,
    /// tanh candidate feeding the cell update.
    pub g: Vec<T>,
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn check_window<T: Scalar>(params: &EmuParams<T>, window: &NoteWindow) -> Result<(), CellError> {
    for slot in window.iter().flatten() {
        if *slot >= params.alphabet {
            return Err(CellError::DimensionMismatch(format!(
                "symbol {} outside alphabet of {}",
                slot, params.alphabet
            )));
        }
    }
    Ok(())
}

/// One step of the recurrence.
pub fn emu_step<T: Scalar>(
    params: &EmuParams<T>,
    prev: &EmuState<T>,
    window: &NoteWindow,
) -> Result<(EmuState<T>, StepTrace<T>), CellError> {
    let hidden = params.hidden;
    if prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(CellError::DimensionMismatch(format!(
            "state dimension {} != hidden {}",
            prev.h.len(),
            hidden
        )));
    }
    check_window(params, window)?;

    let mut a_e = vec![T::zero(); hidden];
    let mut a_f = vec![T::zero(); hidden];
    let mut a_o = vec![T::zero(); hidden];
    let mut a_g = vec![T::zero(); hidden];

    for (j, slot) in window.iter().enumerate() {
        if let Some(sym) = slot {
            params.w_beat[j].col_add_into(*sym, &mut a_e);
        }
    }
    if let Some(x_t) = window[0] {
        params.w_f.col_add_into(x_t, &mut a_f);
        params.w_o.col_add_into(x_t, &mut a_o);
        params.w_c.col_add_into(x_t, &mut a_g);
    }
    params.u_i.matvec_add(&prev.h, &mut a_e);
    params.u_f.matvec_add(&prev.h, &mut a_f);
    params.u_o.matvec_add(&prev.h, &mut a_o);
    params.u_c.matvec_add(&prev.h, &mut a_g);
    if let Some(b) = &params.gate_biases {
        for i in 0..hidden {
            a_e[i] += b.b_e[i];
            a_f[i] += b.b_f[i];
            a_o[i] += b.b_o[i];
            a_g[i] += b.b_c[i];
        }
    }

    let e: Vec<T> = a_e.iter().map(|&x| sigmoid(x)).collect();
    let f: Vec<T> = a_f.iter().map(|&x| sigmoid(x)).collect();
    let o: Vec<T> = a_o.iter().map(|&x| sigmoid(x)).collect();
    let g: Vec<T> = a_g.iter().map(|&x| x.tanh()).collect();

    let mut c = vec![T::zero(); hidden];
    let mut h = vec![T::zero(); hidden];
    for i in 0..hidden {
        c[i] = f[i] * prev.c[i] + e[i] * g[i];
        h[i] = o[i] * c[i];
    }

    Ok((EmuState { h, c }, StepTrace { e, f, o, g }))
}

/// Next-note logits `W_p·h + b_p`.
pub fn logits<T: Scalar>(params: &EmuParams<T>, h: &[T]) -> Vec<T> {
    let mut out = params.b_p.clone();
    params.w_p.matvec_add(h, &mut out);
    out
}

/// Numerically-stabilized softmax (max subtraction), in place.
pub fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().cloned().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x = *x / sum;
    }
}

/// Probability distribution over the next symbol.
pub fn project<T: Scalar>(params: &EmuParams<T>, h: &[T]) -> Vec<T> {
    let mut p = logits(params, h);
    softmax_in_place(&mut p);
    p
}

/// Everything a forward pass produces, retained for training.
#[derive(Debug, Clone)]
pub struct SeqForward<T> {
    /// `states[t]` is the state after consuming `symbols[t]`.
    pub states: Vec<EmuState<T>>,
    pub traces: Vec<StepTrace<T>>,
    /// `probs[t]` is the next-symbol distribution from `states[t].h`.
    pub probs: Vec<Vec<T>>,
}

/// Runs the recurrence over a whole symbol sequence from the zero state.
pub fn forward_sequence<T: Scalar>(
    params: &EmuParams<T>,
    symbols: &[usize],
) -> Result<SeqForward<T>, CellError> {
    if symbols.is_empty() {
        return Err(CellError::EmptySequence);
    }
    let mut states = Vec::with_capacity(symbols.len());
    let mut traces = Vec::with_capacity(symbols.len());
    let mut probs = Vec::with_capacity(symbols.len());
    let mut state = EmuState::zeros(params.hidden);
    for t in 0..symbols.len() {
        let window = window_at(symbols, t);
        let (next, trace) = emu_step(params, &state, &window)?;
        probs.push(project(params, &next.h));
        traces.push(trace);
        states.push(next.clone());
        state = next;
    }
    Ok(SeqForward {
        states,
        traces,
        probs,
    })
}
