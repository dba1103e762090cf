//! `emunet sweep`: one train/generate/evaluate cycle per lambda value,
//! reported as a delta table (reference metrics minus generated metrics).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use emunet_core::encoding::read_corpus;
use emunet_core::generate::{generate_corpus, GenSpec};
use emunet_core::metrics::{report, MetricsReport};
use emunet_core::train::{train, TrainConfig};
use serde_json::json;

use crate::manifest::ManifestBuilder;
use crate::CliError;

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Encoded training corpus
    pub corpus: PathBuf,
    /// Comma-separated lambda values, e.g. 0.0,0.1,0.5
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambdas: Vec<f64>,
    /// Reference corpus for the delta convention; defaults to the corpus
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 2800)]
    pub iterations: usize,
    #[arg(long, default_value_t = 70)]
    pub hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 70)]
    pub unroll_length: usize,
    #[arg(long, default_value_t = 0.005)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Symbols per generated piece
    #[arg(long, default_value_t = 70)]
    pub gen_length: usize,
    /// Pieces per primer symbol
    #[arg(long, default_value_t = 15)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value = "sweep.csv")]
    pub out_csv: PathBuf,
}

struct SweepRow {
    lambda: f64,
    metrics: MetricsReport,
    delta_pc_bar: f64,
    delta_pc_beat: f64,
    delta_auto1: Option<f64>,
}

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    if args.lambdas.is_empty() {
        return Err(CliError::Usage("at least one --lambdas value required".into()));
    }
    for (i, a) in args.lambdas.iter().enumerate() {
        if !(0.0..=1.0).contains(a) {
            return Err(CliError::Usage(format!("lambda {} outside [0, 1]", a)));
        }
        if args.lambdas[..i].iter().any(|b| b == a) {
            return Err(CliError::Usage(format!("duplicate lambda value {}", a)));
        }
    }

    let corpus = read_corpus(BufReader::new(File::open(&args.corpus)?))?;
    let reference_path = args.reference.as_ref().unwrap_or(&args.corpus);
    let reference_corpus = if reference_path == &args.corpus {
        corpus.clone()
    } else {
        read_corpus(BufReader::new(File::open(reference_path)?))?
    };
    let reference = report(&reference_corpus)?;

    let mut builder = ManifestBuilder::new(
        "sweep",
        json!({
            "lambdas": args.lambdas,
            "iterations": args.iterations,
            "hidden": args.hidden,
            "batch_size": args.batch_size,
            "unroll_length": args.unroll_length,
            "learning_rate": args.learning_rate,
            "seed": args.seed,
            "gen_length": args.gen_length,
            "repeats": args.repeats,
            "temperature": args.temperature,
        }),
        args.seed,
    );
    builder.input(&args.corpus);
    builder.input(reference_path);

    let mut rows: Vec<SweepRow> = Vec::new();
    for &lambda in &args.lambdas {
        let config = TrainConfig {
            lambda,
            iterations: args.iterations,
            hidden: args.hidden,
            batch_size: args.batch_size,
            unroll_length: args.unroll_length,
            learning_rate: args.learning_rate,
            seed: args.seed,
            ..TrainConfig::default()
        };
        let outcome = train::<f64>(&config, &corpus)?;
        let spec = GenSpec {
            primer_symbol: 0,
            length: args.gen_length,
            temperature: args.temperature,
            repeats_per_primer: args.repeats,
            seed: args.seed,
            greedy: false,
        };
        let pieces = generate_corpus(&outcome.params, &spec);
        let generated: Vec<_> = pieces.into_iter().map(|p| p.seq).collect();
        let metrics = report(&generated)?;
        let delta_auto1 = match (reference.autocorr[0], metrics.autocorr[0]) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
        eprintln!(
            "lambda {:.2}: PC/bar {:.3} PC/beat {:.3}",
            lambda, metrics.pc_per_bar, metrics.pc_per_beat
        );
        rows.push(SweepRow {
            lambda,
            delta_pc_bar: reference.pc_per_bar - metrics.pc_per_bar,
            delta_pc_beat: reference.pc_per_beat - metrics.pc_per_beat,
            delta_auto1,
            metrics,
        });
    }

    // Delta table: reference values minus the per-lambda results.
    println!("{:<8} {:>8} {:>8} {:>10}", "lambda", "PC/bar", "PC/beat", "Auto-lag1");
    for row in &rows {
        let auto = match row.delta_auto1 {
            Some(x) => format!("{:>+10.4}", x),
            None => format!("{:>10}", "n/a"),
        };
        println!(
            "{:<8.2} {:>+8.4} {:>+8.4} {}",
            row.lambda, row.delta_pc_bar, row.delta_pc_beat, auto
        );
    }

    let mut csv = BufWriter::new(File::create(&args.out_csv)?);
    writeln!(
        csv,
        "lambda,pc_bar,pc_beat,auto_lag1,delta_pc_bar,delta_pc_beat,delta_auto_lag1"
    )?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.lambda,
            row.metrics.pc_per_bar,
            row.metrics.pc_per_beat,
            opt(row.metrics.autocorr[0]),
            row.delta_pc_bar,
            row.delta_pc_beat,
            opt(row.delta_auto1),
        )?;
    }
    csv.flush()?;
    builder.output(&args.out_csv);

    builder.config["reference_metrics"] = serde_json::to_value(&reference).unwrap_or(json!({}));
    builder.write(&args.out_csv.with_extension("manifest.json"))?;
    println!("sweep table -> {}", args.out_csv.display());
    Ok(())
}
