//! `emunet prepare`: MIDI directory -> encoded train/eval corpus files.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use emunet_core::encoding::{split_dataset, write_corpus};
use serde_json::json;

use crate::ingest::ingest_midi_dir;
use crate::manifest::ManifestBuilder;
use crate::CliError;

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// Directory containing .mid/.midi files
    pub midi_dir: PathBuf,
    /// Directory for train.txt, eval.txt, and the manifest
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Fraction of sequences assigned to the training split
    #[arg(long, default_value_t = 0.9)]
    pub split_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Melody track index; defaults to the first track with note events
    #[arg(long)]
    pub track: Option<usize>,
}

pub fn run(args: &PrepareArgs) -> Result<(), CliError> {
    if !(args.split_ratio > 0.0 && args.split_ratio < 1.0) {
        return Err(CliError::Usage("--split-ratio must be in (0, 1)".into()));
    }
    if !args.midi_dir.is_dir() {
        return Err(CliError::Data(format!(
            "{} is not a directory",
            args.midi_dir.display()
        )));
    }

    let mut builder = ManifestBuilder::new(
        "prepare",
        json!({
            "split_ratio": args.split_ratio,
            "seed": args.seed,
            "track": args.track,
        }),
        args.seed,
    );
    builder.input(&args.midi_dir);

    let (corpus, stats) = ingest_midi_dir(&args.midi_dir, args.track)?;
    for s in &stats.skipped {
        eprintln!("skipped {}: {}", s.path.display(), s.reason);
    }
    if corpus.is_empty() {
        return Err(CliError::Data(format!(
            "no parseable MIDI files in {}",
            args.midi_dir.display()
        )));
    }

    let (train, eval) = split_dataset(corpus, args.split_ratio, args.seed);

    fs::create_dir_all(&args.out_dir)?;
    let train_path = args.out_dir.join("train.txt");
    let eval_path = args.out_dir.join("eval.txt");
    write_corpus(BufWriter::new(File::create(&train_path)?), &train)?;
    write_corpus(BufWriter::new(File::create(&eval_path)?), &eval)?;
    builder.output(&train_path);
    builder.output(&eval_path);

    println!(
        "encoded {}/{} files ({} skipped, {} out-of-range notes dropped)",
        stats.encoded,
        stats.files_seen,
        stats.skipped.len(),
        stats.out_of_range_notes
    );
    println!(
        "train: {} sequences -> {}",
        train.len(),
        train_path.display()
    );
    println!("eval: {} sequences -> {}", eval.len(), eval_path.display());

    let mut manifest = builder;
    let skip_list: Vec<serde_json::Value> = stats
        .skipped
        .iter()
        .map(|s| json!({"path": s.path.display().to_string(), "reason": s.reason}))
        .collect();
    manifest.config["skipped"] = json!(skip_list);
    manifest.config["files_seen"] = json!(stats.files_seen);
    manifest.config["encoded"] = json!(stats.encoded);
    manifest.config["out_of_range_notes"] = json!(stats.out_of_range_notes);
    manifest.config["train_sequences"] = json!(train.len());
    manifest.config["eval_sequences"] = json!(eval.len());
    manifest.write(&args.out_dir.join("prepare_manifest.json"))?;
    Ok(())
}
