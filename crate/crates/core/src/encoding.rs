//! Symbol alphabet, grid quantization, and the encoded-corpus text format.
//!
//! Melodies are time-quantized on a 16th-note grid (4 steps per quarter) and
//! written as symbol sequences: symbol 0 is the holding state (sustain or
//! rest), symbols 1..=34 are MIDI pitches 55..=88. A beat is 4 grid steps and
//! a 4/4 bar is 16.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::num::Scalar;

/// Symbol index of the holding state.
pub const HOLD_SYMBOL: usize = 0;
/// Lowest representable MIDI pitch.
pub const PITCH_LO: u8 = 55;
/// Highest representable MIDI pitch.
pub const PITCH_HI: u8 = 88;
/// Alphabet size: 34 pitches plus the holding state.
pub const ALPHABET_SIZE: usize = (PITCH_HI - PITCH_LO + 1) as usize + 1;
/// Grid resolution of the default pipeline (16th notes).
pub const STEPS_PER_QUARTER: u32 = 4;
/// Header line of the encoded-corpus text format.
pub const CORPUS_HEADER: &str = "steps_per_quarter=4 alphabet=35";

#[derive(Debug, Error, PartialEq)]
pub enum EncodingError {
    #[error("value {0} outside the representable range")]
    OutOfRange(i64),
    #[error("notes overlap at grid step {0}")]
    Overlap(usize),
    #[error("no notes to encode")]
    Empty,
    #[error("corpus format: {0}")]
    BadCorpus(String),
}

/// The symbol alphabet: holding state plus the pitch range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alphabet {
    pub hold_symbol: usize,
    pub pitch_lo: u8,
    pub pitch_hi: u8,
    pub size: usize,
}

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet {
            hold_symbol: HOLD_SYMBOL,
            pitch_lo: PITCH_LO,
            pitch_hi: PITCH_HI,
            size: ALPHABET_SIZE,
        }
    }
}

/// What a symbol index stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    Hold,
    Pitch(u8),
}

/// A time-quantized melody as symbol indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteSequence {
    pub symbols: Vec<usize>,
    pub steps_per_quarter: u32,
    pub source_id: Option<String>,
}

impl NoteSequence {
    pub fn new(symbols: Vec<usize>) -> Self {
        NoteSequence {
            symbols,
            steps_per_quarter: STEPS_PER_QUARTER,
            source_id: None,
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Checks the type invariants: non-empty and every symbol in range.
    pub fn validate(&self) -> Result<(), EncodingError> {
        if self.symbols.is_empty() {
            return Err(EncodingError::Empty);
        }
        for &s in &self.symbols {
            if s >= ALPHABET_SIZE {
                return Err(EncodingError::OutOfRange(s as i64));
            }
        }
        Ok(())
    }
}

/// Maps a MIDI pitch in 55..=88 to its symbol index in 1..=34.
pub fn encode_pitch(midi_pitch: u8) -> Result<usize, EncodingError> {
    if !(PITCH_LO..=PITCH_HI).contains(&midi_pitch) {
        return Err(EncodingError::OutOfRange(midi_pitch as i64));
    }
    Ok((midi_pitch - PITCH_LO) as usize + 1)
}

/// Inverse of [`encode_pitch`]; symbol 0 is the holding state.
pub fn decode_symbol(symbol: usize) -> Result<Symbol, EncodingError> {
    if symbol >= ALPHABET_SIZE {
        return Err(EncodingError::OutOfRange(symbol as i64));
    }
    if symbol == HOLD_SYMBOL {
        Ok(Symbol::Hold)
    } else {
        Ok(Symbol::Pitch(PITCH_LO + (symbol as u8 - 1)))
    }
}

/// Basis vector with 1 at `symbol`.
pub fn one_hot<T: Scalar>(symbol: usize, size: usize) -> Result<Vec<T>, EncodingError> {
    if symbol >= size {
        return Err(EncodingError::OutOfRange(symbol as i64));
    }
    let mut v = vec![T::zero(); size];
    v[symbol] = T::one();
    Ok(v)
}

/// A note already mapped onto the 16th-note grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridNote {
    pub onset_step: usize,
    pub duration_steps: usize,
    pub pitch: u8,
}

/// Reduces a grid-note list to a monophonic melody: keeps the highest pitch
/// at each onset, clips every note at the next onset, and drops notes whose
/// pitch falls outside the alphabet. Returns the melody and the count of
/// dropped out-of-range notes.
pub fn extract_melody(notes: &[GridNote]) -> (Vec<GridNote>, usize) {
    let mut sorted: Vec<GridNote> = notes
        .iter()
        .copied()
        .filter(|n| n.duration_steps > 0)
        .collect();
    sorted.sort_by_key(|n| (n.onset_step, std::cmp::Reverse(n.pitch)));

    let mut melody: Vec<GridNote> = Vec::new();
    for note in sorted {
        match melody.last() {
            Some(last) if last.onset_step == note.onset_step => continue, // keep highest
            _ => melody.push(note),
        }
    }
    // Clip sustains at the next onset.
    for i in 0..melody.len().saturating_sub(1) {
        let next_onset = melody[i + 1].onset_step;
        let end = melody[i].onset_step + melody[i].duration_steps;
        if end > next_onset {
            melody[i].duration_steps = next_onset - melody[i].onset_step;
        }
    }
    let before = melody.len();
    melody.retain(|n| n.duration_steps > 0 && (PITCH_LO..=PITCH_HI).contains(&n.pitch));
    let skipped = before - melody.len();
    (melody, skipped)
}

/// Turns sorted, monophonic grid notes into a symbol sequence. The onset step
/// carries the pitch symbol; sustained and rest steps carry the hold symbol.
/// Leading rests are trimmed so the sequence starts with a pitch symbol.
pub fn quantize_events(events: &[GridNote]) -> Result<NoteSequence, EncodingError> {
    if events.is_empty() {
        return Err(EncodingError::Empty);
    }
    let first_onset = events[0].onset_step;
    let last_end = events
        .iter()
        .map(|n| n.onset_step + n.duration_steps)
        .max()
        .unwrap();
    let mut symbols = vec![HOLD_SYMBOL; last_end - first_onset];
    let mut occupied_until = first_onset;
    for note in events {
        if note.onset_step < occupied_until {
            return Err(EncodingError::Overlap(note.onset_step));
        }
        if note.duration_steps == 0 {
            continue;
        }
        symbols[note.onset_step - first_onset] = encode_pitch(note.pitch)?;
        occupied_until = note.onset_step + note.duration_steps;
    }
    if symbols.is_empty() {
        return Err(EncodingError::Empty);
    }
    Ok(NoteSequence::new(symbols))
}

/// Deterministically shuffles the corpus under `seed` and splits it with
/// `floor(ratio * n)` sequences in the training part.
pub fn split_dataset(
    corpus: Vec<NoteSequence>,
    ratio: f64,
    seed: u64,
) -> (Vec<NoteSequence>, Vec<NoteSequence>) {
    assert!(ratio > 0.0 && ratio < 1.0, "split ratio must be in (0, 1)");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = corpus;
    shuffled.shuffle(&mut rng);
    let n_train = (ratio * shuffled.len() as f64).floor() as usize;
    let eval = shuffled.split_off(n_train);
    (shuffled, eval)
}

/// Writes the encoded-corpus text format: a header line followed by one
/// space-separated melody per line.
pub fn write_corpus<W: Write>(mut w: W, corpus: &[NoteSequence]) -> std::io::Result<()> {
    writeln!(w, "{}", CORPUS_HEADER)?;
    for seq in corpus {
        let line: Vec<String> = seq.symbols.iter().map(|s| s.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Reads the encoded-corpus text format written by [`write_corpus`].
pub fn read_corpus<R: BufRead>(r: R) -> Result<Vec<NoteSequence>, EncodingError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| EncodingError::BadCorpus("empty file".into()))?
        .map_err(|e| EncodingError::BadCorpus(e.to_string()))?;
    if header.trim() != CORPUS_HEADER {
        return Err(EncodingError::BadCorpus(format!(
            "expected header `{}`, found `{}`",
            CORPUS_HEADER,
            header.trim()
        )));
    }
    let mut corpus = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| EncodingError::BadCorpus(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut symbols = Vec::new();
        for tok in line.split_whitespace() {
            let s: usize = tok.parse().map_err(|_| {
                EncodingError::BadCorpus(format!("line {}: bad symbol `{}`", i + 2, tok))
            })?;
            if s >= ALPHABET_SIZE {
                return Err(EncodingError::OutOfRange(s as i64));
            }
            symbols.push(s);
        }
        let mut seq = NoteSequence::new(symbols);
        seq.source_id = Some(format!("line{}", i + 2));
        seq.validate()?;
        corpus.push(seq);
    }
    Ok(corpus)
}
