//! `emunet generate`: checkpoint -> one MIDI file per generated piece plus
//! a piece manifest CSV.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use emunet_core::checkpoint::load_checkpoint;
use emunet_core::encoding::write_corpus;
use emunet_core::generate::{generate_corpus, GenSpec};
use emunet_core::midi::write_smf;
use serde_json::json;

use crate::manifest::ManifestBuilder;
use crate::CliError;

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Trained checkpoint
    pub checkpoint: PathBuf,
    /// Directory for the MIDI files and manifest CSV
    #[arg(long, default_value = "generated")]
    pub out_dir: PathBuf,
    /// Symbols per piece (primer included)
    #[arg(long, default_value_t = 70)]
    pub length: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Pieces per primer symbol (35 primers x repeats pieces in total)
    #[arg(long, alias = "repeats-per-primer", default_value_t = 15)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Argmax decoding instead of sampling
    #[arg(long, default_value_t = false)]
    pub greedy: bool,
    /// Tempo stamped on the exported MIDI files
    #[arg(long, default_value_t = 120.0)]
    pub tempo_bpm: f64,
    /// Also write the pieces in the encoded-corpus text format
    #[arg(long)]
    pub corpus_out: Option<PathBuf>,
}

pub fn run(args: &GenerateArgs) -> Result<(), CliError> {
    if args.length == 0 {
        return Err(CliError::Usage("--length must be at least 1".into()));
    }
    if args.temperature <= 0.0 {
        return Err(CliError::Usage("--temperature must be positive".into()));
    }
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }

    let (params, meta) = load_checkpoint::<f64>(&args.checkpoint)?;
    let spec = GenSpec {
        primer_symbol: 0,
        length: args.length,
        temperature: args.temperature,
        repeats_per_primer: args.repeats,
        seed: args.seed,
        greedy: args.greedy,
    };

    let mut builder = ManifestBuilder::new(
        "generate",
        json!({
            "spec": serde_json::to_value(&spec).unwrap_or(json!({})),
            "checkpoint_lambda": meta.lambda,
            "hidden": meta.hidden,
            "alphabet": meta.alphabet,
            "tempo_bpm": args.tempo_bpm,
        }),
        args.seed,
    );
    builder.input(&args.checkpoint);

    let pieces = generate_corpus(&params, &spec);
    fs::create_dir_all(&args.out_dir)?;

    let csv_path = args.out_dir.join("manifest.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    writeln!(csv, "piece_id,primer,repeat,seed,path")?;
    for piece in &pieces {
        let filename = format!("piece_{:03}.mid", piece.piece_id);
        let path = args.out_dir.join(&filename);
        fs::write(&path, write_smf(&piece.seq, args.tempo_bpm))?;
        writeln!(
            csv,
            "{},{},{},{},{}",
            piece.piece_id, piece.primer, piece.repeat, piece.seed, filename
        )?;
    }
    csv.flush()?;
    builder.output(&csv_path);

    if let Some(corpus_path) = &args.corpus_out {
        let seqs: Vec<_> = pieces.iter().map(|p| p.seq.clone()).collect();
        write_corpus(BufWriter::new(File::create(corpus_path)?), &seqs)?;
        builder.output(corpus_path);
    }

    println!(
        "{} pieces ({} primers x {} repeats, length {}) -> {}",
        pieces.len(),
        params.alphabet(),
        args.repeats,
        args.length,
        args.out_dir.display()
    );
    builder.write(&args.out_dir.join("generate_manifest.json"))?;
    Ok(())
}
