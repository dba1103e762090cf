//! CLI wiring: subcommand definitions, dispatch, and exit-code policy.
//!
//! Exit codes: 0 success, 2 usage errors (including clap parse failures),
//! 3 data/input errors, 4 internal check failures (gradient check mismatch,
//! non-finite training state).

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod ingest;
pub mod manifest;

pub use commands::{evaluate, generate, gradcheck, prepare, sweep, train};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Check(_) => 4,
        }
    }

    pub fn data(err: impl std::fmt::Display) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<emunet_core::encoding::EncodingError> for CliError {
    fn from(e: emunet_core::encoding::EncodingError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<emunet_core::midi::MidiError> for CliError {
    fn from(e: emunet_core::midi::MidiError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<emunet_core::checkpoint::CheckpointError> for CliError {
    fn from(e: emunet_core::checkpoint::CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<emunet_core::metrics::MetricsError> for CliError {
    fn from(e: emunet_core::metrics::MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<emunet_core::train::TrainError> for CliError {
    fn from(e: emunet_core::train::TrainError) -> Self {
        match e {
            emunet_core::train::TrainError::NonFinite { .. } => CliError::Check(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "emunet",
    version,
    about = "Beat-aware recurrent melody modeling: prepare data, train, generate, evaluate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Encode a directory of MIDI files into train/eval corpus text files
    Prepare(commands::prepare::PrepareArgs),
    /// Train a model on an encoded corpus
    Train(commands::train::TrainArgs),
    /// Sample melodies from a checkpoint and write them as MIDI
    Generate(commands::generate::GenerateArgs),
    /// Report metrics for corpora (text files or MIDI directories)
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Train, generate, and evaluate across a list of lambda values
    Sweep(commands::sweep::SweepArgs),
    /// Verify analytic gradients against central finite differences
    Gradcheck(commands::gradcheck::GradcheckArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare(args) => commands::prepare::run(&args),
        Command::Train(args) => commands::train::run(&args),
        Command::Generate(args) => commands::generate::run(&args),
        Command::Evaluate(args) => commands::evaluate::run(&args),
        Command::Sweep(args) => commands::sweep::run(&args),
        Command::Gradcheck(args) => commands::gradcheck::run(&args),
    }
}
