//! Objective evaluation battery: pitch count per bar and per beat,
//! autocorrelation of the pitch series at lags 1-3, and the symbol
//! histogram. Reports average per-sequence metrics over a corpus.

use serde::Serialize;
use thiserror::Error;

use crate::encoding::{decode_symbol, NoteSequence, Symbol, ALPHABET_SIZE, HOLD_SYMBOL};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("lag {lag} too large for sequence of length {len}")]
    LagTooLarge { lag: usize, len: usize },
    #[error("empty corpus")]
    EmptyCorpus,
}

/// Corpus-level metric averages plus the aggregated histogram.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    /// Mean distinct-pitch count per 16-step bar.
    pub pc_per_bar: f64,
    /// Mean distinct-pitch count per 4-step beat.
    pub pc_per_beat: f64,
    /// Mean autocorrelation at lags 1-3; `None` when every sequence was
    /// undefined at that lag.
    pub autocorr: [Option<f64>; 3],
    /// Sequences excluded from each lag's mean (zero variance or too short).
    pub autocorr_excluded: [usize; 3],
    /// Fraction of all symbols equal to the holding state.
    pub hold_fraction: f64,
    /// Symbol counts, indices 0..=34.
    pub histogram: Vec<u64>,
    pub n_sequences: usize,
}

fn mean_distinct_pitches(symbols: &[usize], chunk_len: usize) -> f64 {
    if symbols.is_empty() {
        return 0.0;
    }
    let mut total = 0usize;
    let mut chunks = 0usize;
    for chunk in symbols.chunks(chunk_len) {
        let mut seen = [false; ALPHABET_SIZE];
        let mut distinct = 0;
        for &s in chunk {
            if s != HOLD_SYMBOL && !seen[s] {
                seen[s] = true;
                distinct += 1;
            }
        }
        total += distinct;
        chunks += 1;
    }
    total as f64 / chunks as f64
}

/// Mean count of distinct pitches per 16-step bar (final partial bar
/// included). Re-articulated pitches count once per bar.
pub fn pc_per_bar(seq: &NoteSequence) -> f64 {
    mean_distinct_pitches(&seq.symbols, seq.steps_per_quarter as usize * 4)
}

/// Mean count of distinct pitches per 4-step beat (final partial beat
/// included).
pub fn pc_per_beat(seq: &NoteSequence) -> f64 {
    mean_distinct_pitches(&seq.symbols, seq.steps_per_quarter as usize)
}

/// Pitch series with holds carried: trims leading holds, then repeats the
/// sounding pitch through every hold step.
fn pitch_series(symbols: &[usize]) -> Vec<f64> {
    let mut series = Vec::with_capacity(symbols.len());
    let mut current: Option<f64> = None;
    for &s in symbols {
        if let Ok(Symbol::Pitch(p)) = decode_symbol(s) {
            current = Some(p as f64);
        }
        if let Some(pitch) = current {
            series.push(pitch);
        }
    }
    series
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation between the hold-carried pitch series and its
/// `lag`-step shift. `None` when the series is constant or too short after
/// trimming leading holds.
pub fn autocorrelation(seq: &NoteSequence, lag: usize) -> Result<Option<f64>, MetricsError> {
    if lag == 0 || lag >= seq.len() {
        return Err(MetricsError::LagTooLarge { lag, len: seq.len() });
    }
    let series = pitch_series(&seq.symbols);
    if series.len() <= lag {
        return Ok(None);
    }
    let n = series.len() - lag;
    Ok(pearson(&series[..n], &series[lag..]))
}

/// Per-sequence metrics averaged over the corpus, histogram aggregated over
/// all symbols. Undefined autocorrelations are excluded from their lag's
/// mean and counted.
pub fn report(corpus: &[NoteSequence]) -> Result<MetricsReport, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n = corpus.len() as f64;
    let mut histogram = vec![0u64; ALPHABET_SIZE];
    let mut bar_sum = 0.0;
    let mut beat_sum = 0.0;
    let mut lag_sums = [0.0f64; 3];
    let mut lag_counts = [0usize; 3];
    let mut excluded = [0usize; 3];

    for seq in corpus {
        bar_sum += pc_per_bar(seq);
        beat_sum += pc_per_beat(seq);
        for &s in &seq.symbols {
            histogram[s.min(ALPHABET_SIZE - 1)] += 1;
        }
        for (lag_index, lag) in (1..=3).enumerate() {
            let value = if seq.len() > lag {
                autocorrelation(seq, lag).expect("lag bounds checked")
            } else {
                None
            };
            match value {
                Some(r) => {
                    lag_sums[lag_index] += r;
                    lag_counts[lag_index] += 1;
                }
                None => excluded[lag_index] += 1,
            }
        }
    }

    let total_symbols: u64 = histogram.iter().sum();
    let mut autocorr = [None; 3];
    for i in 0..3 {
        if lag_counts[i] > 0 {
            autocorr[i] = Some(lag_sums[i] / lag_counts[i] as f64);
        }
    }
    Ok(MetricsReport {
        pc_per_bar: bar_sum / n,
        pc_per_beat: beat_sum / n,
        autocorr,
        autocorr_excluded: excluded,
        hold_fraction: histogram[HOLD_SYMBOL] as f64 / total_symbols.max(1) as f64,
        histogram,
        n_sequences: corpus.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(symbols: Vec<usize>) -> NoteSequence {
        NoteSequence::new(symbols)
    }

    /// Independent Pearson evaluation used as the oracle for frozen values.
    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx: f64 = x.iter().sum::<f64>() / n;
        let my: f64 = y.iter().sum::<f64>() / n;
        let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let dx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
        let dy: f64 = y.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
        num / (dx * dy)
    }

    #[test]
    fn pc_per_bar_counts_distinct_pitches() {
        let s = seq(vec![5, 5, 0, 0, 7, 0, 0, 0, 5, 0, 0, 0, 9, 0, 0, 0]);
        assert_eq!(pc_per_bar(&s), 3.0);
        assert_eq!(pc_per_bar(&seq(vec![0; 32])), 0.0);
    }

    #[test]
    fn pc_per_bar_averages_over_bars() {
        let mut symbols = vec![0usize; 32];
        symbols[0] = 1;
        symbols[4] = 2; // bar 1: {1, 2}
        symbols[16] = 3;
        symbols[20] = 4;
        symbols[24] = 5;
        symbols[28] = 6; // bar 2: {3, 4, 5, 6}
        assert_eq!(pc_per_bar(&seq(symbols)), 3.0);
    }

    #[test]
    fn pc_per_beat_examples() {
        assert_eq!(pc_per_beat(&seq(vec![5, 5, 0, 0])), 1.0);
        assert_eq!(pc_per_beat(&seq(vec![1, 2, 3, 4])), 4.0);
        // An all-hold beat contributes 0 to the mean.
        assert_eq!(pc_per_beat(&seq(vec![1, 2, 3, 4, 0, 0, 0, 0])), 2.0);
    }

    #[test]
    fn pc_metrics_ignore_trailing_holds_within_the_last_chunk() {
        let base = seq(vec![1, 2, 3, 4, 5, 0, 0, 0, 0, 0, 0, 0, 6]);
        let padded = seq({
            let mut s = base.symbols.clone();
            s.extend([0, 0, 0]); // completes the bar/beat, starts no new one
            s
        });
        assert_eq!(pc_per_bar(&base), pc_per_bar(&padded));
        assert_eq!(pc_per_beat(&base), pc_per_beat(&padded));
    }

    #[test]
    fn alternating_pitches_anticorrelate_at_lag_one() {
        let s = seq(vec![1, 3, 1, 3, 1, 3, 1, 3]);
        let r = autocorrelation(&s, 1).unwrap().unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_pitch_is_undefined() {
        let s = seq(vec![5, 0, 5, 0, 5, 5]);
        assert_eq!(autocorrelation(&s, 1).unwrap(), None);
    }

    #[test]
    fn lag2_of_updown_contour_matches_pearson_oracle() {
        // Pitch series 60,62,64,62,60,62,64,62 as symbols (+hold carry).
        let s = seq(vec![6, 8, 10, 8, 6, 8, 10, 8]);
        let series: Vec<f64> = vec![60.0, 62.0, 64.0, 62.0, 60.0, 62.0, 64.0, 62.0];
        let expected = pearson_oracle(&series[..6], &series[2..]);
        let r = autocorrelation(&s, 2).unwrap().unwrap();
        assert!((r - expected).abs() < 1e-12);
        // Frozen value: the lag-2 shift mirrors the contour exactly.
        assert!((r - -1.0).abs() < 1e-12);
    }

    #[test]
    fn hold_carry_extends_the_sounding_pitch() {
        // Leading hold trimmed; 60 held once, then 64, 62:
        // series (60, 60, 64, 62).
        let s = seq(vec![0, 6, 0, 10, 8]);
        let r = autocorrelation(&s, 1).unwrap().unwrap();
        let expected = pearson_oracle(&[60.0, 60.0, 64.0], &[60.0, 64.0, 62.0]);
        assert!((r - expected).abs() < 1e-12);
    }

    #[test]
    fn lag_bounds_are_enforced() {
        let s = seq(vec![1, 2, 3]);
        assert!(autocorrelation(&s, 3).is_err());
        assert!(autocorrelation(&s, 0).is_err());
        assert!(autocorrelation(&s, 1).unwrap().is_some());
    }

    #[test]
    fn all_hold_sequence_is_undefined_at_every_lag() {
        let s = seq(vec![0, 0, 0, 0]);
        assert_eq!(autocorrelation(&s, 1).unwrap(), None);
    }

    #[test]
    fn autocorrelation_stays_in_unit_interval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let symbols: Vec<usize> = (0..40).map(|_| rng.gen_range(0..35)).collect();
            let s = seq(symbols);
            for lag in 1..=3 {
                if let Some(r) = autocorrelation(&s, lag).unwrap() {
                    assert!((-1.0..=1.0).contains(&r), "lag {} value {}", lag, r);
                }
            }
        }
    }

    #[test]
    fn report_of_single_sequence_equals_its_metrics() {
        let s = seq(vec![5, 5, 0, 0, 7, 0, 0, 0, 5, 0, 0, 0, 9, 0, 0, 0]);
        let rep = report(std::slice::from_ref(&s)).unwrap();
        assert_eq!(rep.pc_per_bar, pc_per_bar(&s));
        assert_eq!(rep.pc_per_beat, pc_per_beat(&s));
        assert_eq!(rep.n_sequences, 1);
        assert_eq!(rep.autocorr[0], autocorrelation(&s, 1).unwrap());
    }

    #[test]
    fn report_averages_two_sequences_by_hand() {
        let a = seq(vec![1, 2, 3, 4]); // pc_beat 4, pc_bar 4
        let b = seq(vec![5, 0, 0, 0]); // pc_beat 1, pc_bar 1
        let rep = report(&[a, b]).unwrap();
        assert_eq!(rep.pc_per_bar, 2.5);
        assert_eq!(rep.pc_per_beat, 2.5);
        assert_eq!(rep.histogram[1], 1);
        assert_eq!(rep.histogram[5], 1);
        assert_eq!(rep.histogram[0], 3);
        assert_eq!(rep.hold_fraction, 3.0 / 8.0);
        // b's series is constant, so lag 1 comes from a alone.
        assert_eq!(rep.autocorr_excluded[0], 1);
        let a_only = autocorrelation(&seq(vec![1, 2, 3, 4]), 1).unwrap().unwrap();
        assert!((rep.autocorr[0].unwrap() - a_only).abs() < 1e-12);
    }

    #[test]
    fn histogram_sums_to_symbol_count() {
        let corpus = vec![seq(vec![1, 0, 2]), seq(vec![0, 0, 34, 5, 5])];
        let rep = report(&corpus).unwrap();
        let total: u64 = rep.histogram.iter().sum();
        assert_eq!(total, 8);
        assert_eq!(rep.hold_fraction, 3.0 / 8.0);
        assert!(rep.pc_per_bar >= rep.pc_per_beat);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert_eq!(report(&[]).unwrap_err(), MetricsError::EmptyCorpus);
    }
}
