//! `emunet train`: encoded corpus -> checkpoint + loss curve CSV.
//!
//! Flags mirror the `TrainConfig` fields one-to-one. A flat `key=value`
//! config file can set the same keys; explicit flags override it.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use emunet_core::checkpoint::save_checkpoint;
use emunet_core::encoding::read_corpus;
use emunet_core::train::{train_with, TrainConfig};
use serde_json::json;

use crate::manifest::ManifestBuilder;
use crate::CliError;

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// Encoded corpus (the `prepare` output format)
    pub corpus: PathBuf,
    /// Checkpoint output path
    #[arg(long, default_value = "model.emn")]
    pub out: PathBuf,
    /// Loss curve CSV output path
    #[arg(long, default_value = "loss.csv")]
    pub loss_csv: PathBuf,
    /// Optional flat key=value config file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub unroll_length: Option<usize>,
    /// Global-norm gradient clip; 0 disables
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Add per-gate bias vectors (non-default cell variant)
    #[arg(long, default_value_t = false)]
    pub gate_biases: bool,
}

fn parse_config_file(path: &Path, config: &mut TrainConfig) -> Result<(), CliError> {
    let text = fs::read_to_string(path)?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected key=value", path.display(), lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |e: &dyn std::fmt::Display| {
            CliError::Usage(format!("{}:{}: {}: {}", path.display(), lineno + 1, key, e))
        };
        match key {
            "lambda" => config.lambda = value.parse().map_err(|e| bad(&e))?,
            "learning_rate" => config.learning_rate = value.parse().map_err(|e| bad(&e))?,
            "beta1" => config.beta1 = value.parse().map_err(|e| bad(&e))?,
            "beta2" => config.beta2 = value.parse().map_err(|e| bad(&e))?,
            "epsilon" => config.epsilon = value.parse().map_err(|e| bad(&e))?,
            "batch_size" => config.batch_size = value.parse().map_err(|e| bad(&e))?,
            "iterations" => config.iterations = value.parse().map_err(|e| bad(&e))?,
            "hidden" => config.hidden = value.parse().map_err(|e| bad(&e))?,
            "seed" => config.seed = value.parse().map_err(|e| bad(&e))?,
            "unroll_length" => config.unroll_length = value.parse().map_err(|e| bad(&e))?,
            "grad_clip" => {
                let v: f64 = value.parse().map_err(|e| bad(&e))?;
                config.grad_clip = (v > 0.0).then_some(v);
            }
            "gate_biases" => config.gate_biases = value.parse().map_err(|e| bad(&e))?,
            other => {
                return Err(CliError::Usage(format!(
                    "{}:{}: unknown config key `{}`",
                    path.display(),
                    lineno + 1,
                    other
                )))
            }
        }
    }
    Ok(())
}

/// Defaults <- config file <- explicit flags.
pub fn resolve_config(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut config = TrainConfig::default();
    if let Some(path) = &args.config {
        parse_config_file(path, &mut config)?;
    }
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.beta1 {
        config.beta1 = v;
    }
    if let Some(v) = args.beta2 {
        config.beta2 = v;
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.hidden {
        config.hidden = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.unroll_length {
        config.unroll_length = v;
    }
    if let Some(v) = args.grad_clip {
        config.grad_clip = (v > 0.0).then_some(v);
    }
    if args.gate_biases {
        config.gate_biases = true;
    }
    if !(0.0..=1.0).contains(&config.lambda) {
        return Err(CliError::Usage("--lambda must be in [0, 1]".into()));
    }
    Ok(config)
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let config = resolve_config(args)?;
    let corpus = read_corpus(BufReader::new(File::open(&args.corpus)?))?;

    let mut builder = ManifestBuilder::new(
        "train",
        serde_json::to_value(&config).unwrap_or(json!({})),
        config.seed,
    );
    builder.input(&args.corpus);

    let report_every = (config.iterations / 20).max(1);
    let outcome = train_with::<f64>(&config, &corpus, |iteration, loss| {
        if iteration % report_every == 0 || iteration + 1 == config.iterations {
            println!(
                "iter {:>6}  l_e {:>9.5}  l_d {:>9.5}  total {:>9.5}",
                iteration, loss.l_e, loss.l_d, loss.total
            );
        }
    })?;

    save_checkpoint(&outcome.params, config.lambda, &args.out)?;
    let mut csv = BufWriter::new(File::create(&args.loss_csv)?);
    writeln!(csv, "iteration,l_e,l_d,total")?;
    for (i, loss) in outcome.curve.iter().enumerate() {
        writeln!(csv, "{},{},{},{}", i, loss.l_e, loss.l_d, loss.total)?;
    }
    csv.flush()?;

    let last = outcome.curve.last().expect("at least one iteration");
    println!(
        "final: l_e {:.6}  l_d {:.6}  total {:.6} (lambda {})",
        last.l_e, last.l_d, last.total, last.lambda
    );
    println!("checkpoint -> {}", args.out.display());

    builder.output(&args.out);
    builder.output(&args.loss_csv);
    let manifest_path = args.out.with_extension("manifest.json");
    builder.write(&manifest_path)?;
    Ok(())
}
