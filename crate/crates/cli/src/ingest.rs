//! Shared ingestion: turn a MIDI directory or an encoded corpus file into
//! `NoteSequence`s, logging per-file skips instead of failing the run.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use emunet_core::encoding::{extract_melody, quantize_events, read_corpus, NoteSequence};
use emunet_core::midi::{events_to_grid, first_note_track, parse_smf};
use walkdir::WalkDir;

use crate::CliError;

#[derive(Debug)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct IngestStats {
    pub files_seen: usize,
    pub encoded: usize,
    pub skipped: Vec<SkippedFile>,
    pub out_of_range_notes: usize,
}

fn is_midi_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
        .unwrap_or(false)
}

fn encode_midi_file(
    path: &Path,
    track_override: Option<usize>,
    stats: &mut IngestStats,
) -> Option<NoteSequence> {
    let skip = |reason: String, stats: &mut IngestStats| {
        stats.skipped.push(SkippedFile { path: path.to_path_buf(), reason });
        None
    };
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => return skip(format!("read: {e}"), stats),
    };
    let doc = match parse_smf(&bytes) {
        Ok(d) => d,
        Err(e) => return skip(format!("parse: {e}"), stats),
    };
    let track = match track_override.or_else(|| first_note_track(&doc)) {
        Some(t) => t,
        None => return skip("no track with note events".into(), stats),
    };
    let grid = match events_to_grid(&doc, track) {
        Ok(g) => g,
        Err(e) => return skip(format!("grid: {e}"), stats),
    };
    let (melody, dropped) = extract_melody(&grid);
    stats.out_of_range_notes += dropped;
    match quantize_events(&melody) {
        Ok(mut seq) => {
            seq.source_id = Some(path.display().to_string());
            Some(seq)
        }
        Err(e) => skip(format!("quantize: {e}"), stats),
    }
}

/// Encodes every `.mid`/`.midi` under `dir` (sorted by path for
/// reproducibility). Unparseable files become skip entries.
pub fn ingest_midi_dir(
    dir: &Path,
    track_override: Option<usize>,
) -> Result<(Vec<NoteSequence>, IngestStats), CliError> {
    let mut files: Vec<PathBuf> = WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && is_midi_file(e.path()))
        .map(|e| e.into_path())
        .collect();
    files.sort();

    let mut stats = IngestStats {
        files_seen: files.len(),
        ..IngestStats::default()
    };
    let mut corpus = Vec::new();
    for path in &files {
        if let Some(seq) = encode_midi_file(path, track_override, &mut stats) {
            corpus.push(seq);
        }
    }
    stats.encoded = corpus.len();
    Ok((corpus, stats))
}

/// Loads sequences from either an encoded corpus text file or a MIDI
/// directory.
pub fn load_input(path: &Path) -> Result<Vec<NoteSequence>, CliError> {
    if path.is_dir() {
        let (corpus, stats) = ingest_midi_dir(path, None)?;
        for s in &stats.skipped {
            eprintln!("skipped {}: {}", s.path.display(), s.reason);
        }
        if corpus.is_empty() {
            return Err(CliError::Data(format!(
                "{}: no parseable MIDI files",
                path.display()
            )));
        }
        Ok(corpus)
    } else {
        let file = fs::File::open(path)?;
        let corpus = read_corpus(BufReader::new(file))?;
        if corpus.is_empty() {
            return Err(CliError::Data(format!("{}: empty corpus", path.display())));
        }
        Ok(corpus)
    }
}
