//! Beat-aware recurrent melody modeling.
//!
//! The model is a single recurrent layer of Enhanced Memory Units — an
//! LSTM-style cell whose input gate aggregates the current note and the
//! three before it (one 4/4 beat on a 16th-note grid) — trained with a
//! combined cross-entropy + cosine-distance objective and exact
//! backpropagation through time.
//!
//! Module map:
//! - [`encoding`]: symbol alphabet, grid quantization, corpus text format
//! - [`midi`]: Standard MIDI File parse/write
//! - [`cell`]: the recurrent unit and output projection
//! - [`loss`]: cross-entropy, cosine distance, λ-combined loss
//! - [`train`]: BPTT, the training loop; [`adam`]: the optimizer
//! - [`gradcheck`]: finite-difference gradient verification
//! - [`checkpoint`]: binary model persistence
//! - [`generate`]: autoregressive sampling, the 525-piece protocol
//! - [`metrics`]: pitch-count and autocorrelation evaluation
//!
//! All model math is generic over [`num::Scalar`] (`f32` or `f64`); the
//! aliases below fix the default `f64` precision used by training,
//! checkpoints, and the CLI.

pub mod adam;
pub mod cell;
pub mod checkpoint;
pub mod encoding;
pub mod generate;
pub mod gradcheck;
pub mod loss;
pub mod mat;
pub mod metrics;
pub mod midi;
pub mod num;
pub mod train;

pub use cell::{EmuParams, EmuState, StepTrace};
pub use encoding::{Alphabet, NoteSequence, ALPHABET_SIZE};
pub use loss::LossBreakdown;
pub use train::{TrainConfig, TrainOutcome};

/// Default-precision parameter set (training and checkpoints run in `f64`).
pub type EmuParamsF64 = cell::EmuParams<f64>;
pub type EmuStateF64 = cell::EmuState<f64>;
pub type GradientsF64 = train::Gradients<f64>;
pub type LossBreakdownF64 = loss::LossBreakdown<f64>;
pub type TrainOutcomeF64 = train::TrainOutcome<f64>;

/// Single-precision variants for memory-constrained experimentation.
pub type EmuParamsF32 = cell::EmuParams<f32>;
pub type EmuStateF32 = cell::EmuState<f32>;
