//! `emunet evaluate`: metric reports for one or more corpora, with a delta
//! row against the first input (reference minus value).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use emunet_core::metrics::{report, MetricsReport};
use serde_json::json;

use crate::ingest::load_input;
use crate::CliError;

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Corpus text files or MIDI directories; the first is the reference
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Write all reports (and deltas) as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write per-input symbol histograms as CSV (one file per input)
    #[arg(long)]
    pub hist_csv: Option<PathBuf>,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:>9.4}", x),
        None => format!("{:>9}", "n/a"),
    }
}

fn print_row(name: &str, r: &MetricsReport) {
    println!(
        "{:<28} {:>8.4} {:>8.4} {} {} {} {:>7.2}% {:>6}",
        name,
        r.pc_per_bar,
        r.pc_per_beat,
        fmt_opt(r.autocorr[0]),
        fmt_opt(r.autocorr[1]),
        fmt_opt(r.autocorr[2]),
        100.0 * r.hold_fraction,
        r.n_sequences
    );
}

/// reference minus value, per Table-style delta reporting.
fn delta(reference: &MetricsReport, value: &MetricsReport) -> serde_json::Value {
    let lag = |i: usize| match (reference.autocorr[i], value.autocorr[i]) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    json!({
        "pc_per_bar": reference.pc_per_bar - value.pc_per_bar,
        "pc_per_beat": reference.pc_per_beat - value.pc_per_beat,
        "auto_lag1": lag(0),
        "auto_lag2": lag(1),
        "auto_lag3": lag(2),
    })
}

fn write_histogram(path: &Path, r: &MetricsReport) -> Result<(), CliError> {
    let total: u64 = r.histogram.iter().sum();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "symbol,count,fraction")?;
    for (symbol, &count) in r.histogram.iter().enumerate() {
        writeln!(
            out,
            "{},{},{}",
            symbol,
            count,
            count as f64 / total.max(1) as f64
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn run(args: &EvaluateArgs) -> Result<(), CliError> {
    let mut reports: Vec<(String, MetricsReport)> = Vec::new();
    for input in &args.inputs {
        let corpus = load_input(input)?;
        reports.push((input.display().to_string(), report(&corpus)?));
    }

    println!(
        "{:<28} {:>8} {:>8} {:>9} {:>9} {:>9} {:>8} {:>6}",
        "input", "PC/bar", "PC/beat", "Auto-lag1", "Auto-lag2", "Auto-lag3", "hold", "n"
    );
    for (name, r) in &reports {
        print_row(name, r);
    }

    let mut deltas = Vec::new();
    if reports.len() > 1 {
        let (ref_name, reference) = &reports[0];
        println!("-- deltas ({} minus row) --", ref_name);
        for (name, r) in reports.iter().skip(1) {
            let d = delta(reference, r);
            let lag_str = |key: &str| match d[key].as_f64() {
                Some(x) => format!("{:>+9.4}", x),
                None => format!("{:>9}", "n/a"),
            };
            println!(
                "{:<28} {:>+8.4} {:>+8.4} {} {} {}",
                name,
                d["pc_per_bar"].as_f64().unwrap(),
                d["pc_per_beat"].as_f64().unwrap(),
                lag_str("auto_lag1"),
                lag_str("auto_lag2"),
                lag_str("auto_lag3"),
            );
            deltas.push(json!({"input": name, "delta": d}));
        }
    }

    for (i, excluded) in reports
        .iter()
        .flat_map(|(n, r)| {
            r.autocorr_excluded
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(move |(lag, &c)| (n.clone(), lag + 1, c))
        })
        .enumerate()
    {
        if i == 0 {
            println!("-- autocorrelation exclusions (undefined sequences) --");
        }
        println!("{}: lag {} excluded {}", excluded.0, excluded.1, excluded.2);
    }

    if let Some(json_path) = &args.json {
        let doc = json!({
            "reports": reports
                .iter()
                .map(|(name, r)| json!({"input": name, "metrics": r}))
                .collect::<Vec<_>>(),
            "deltas": deltas,
        });
        fs::write(json_path, serde_json::to_string_pretty(&doc).unwrap())?;
    }

    if let Some(hist_base) = &args.hist_csv {
        for (i, (_, r)) in reports.iter().enumerate() {
            let path = if reports.len() == 1 {
                hist_base.clone()
            } else {
                let stem = hist_base
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("hist");
                hist_base.with_file_name(format!("{}_{}.csv", stem, i))
            };
            write_histogram(&path, r)?;
        }
    }
    Ok(())
}
