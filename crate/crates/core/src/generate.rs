//! Autoregressive melody sampling from a trained model.
//!
//! Each piece starts from a primer symbol and the zero state; the sampled
//! symbol at every step feeds back into the four-note input window. The
//! full generation protocol draws one piece per (primer symbol, repeat)
//! pair — 35 primers x 15 repeats = 525 pieces by default — with a child
//! seed derived from the base seed so pieces are independent of generation
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{emu_step, logits, softmax_in_place, window_at, EmuParams, EmuState};
use crate::encoding::NoteSequence;
use crate::num::{cast, mix64, Scalar};

/// Sampling controls for one piece (or, with `repeats_per_primer`, a corpus).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSpec {
    pub primer_symbol: usize,
    pub length: usize,
    pub temperature: f64,
    pub repeats_per_primer: usize,
    pub seed: u64,
    /// Argmax decoding (the temperature -> 0 limit).
    pub greedy: bool,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            primer_symbol: 0,
            length: 70,
            temperature: 1.0,
            repeats_per_primer: 15,
            seed: 0,
            greedy: false,
        }
    }
}

/// One generated piece and the seed that produced it.
#[derive(Debug, Clone)]
pub struct GeneratedPiece {
    pub piece_id: usize,
    pub primer: usize,
    pub repeat: usize,
    pub seed: u64,
    pub seq: NoteSequence,
}

/// Child seed for (primer, repeat) under a base seed. The SplitMix64 mix is
/// bijective, so distinct pieces always get distinct seeds.
pub fn child_seed(base: u64, primer: usize, repeat: usize, repeats_per_primer: usize) -> u64 {
    let index = (primer * repeats_per_primer + (repeat - 1)) as u64;
    mix64(base.wrapping_add(1 + index))
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = k;
        }
    }
    best
}

fn sample_categorical<T: Scalar, R: Rng>(p: &[T], rng: &mut R) -> usize {
    let u: T = cast(rng.gen::<f64>());
    let mut cum = T::zero();
    for (k, prob) in p.iter().enumerate() {
        cum += *prob;
        if u < cum {
            return k;
        }
    }
    p.len() - 1
}

/// Samples one sequence of `spec.length` symbols (primer included).
pub fn sample_sequence<T: Scalar>(params: &EmuParams<T>, spec: &GenSpec) -> NoteSequence {
    assert!(spec.length >= 1, "length must be at least 1");
    assert!(spec.temperature > 0.0, "temperature must be positive");
    assert!(
        spec.primer_symbol < params.alphabet(),
        "primer outside alphabet"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut symbols = Vec::with_capacity(spec.length);
    symbols.push(spec.primer_symbol);
    let mut state = EmuState::zeros(params.hidden());
    let inv_temp: T = cast(1.0 / spec.temperature);

    while symbols.len() < spec.length {
        let window = window_at(&symbols, symbols.len() - 1);
        let (next, _) = emu_step(params, &state, &window).expect("validated inputs");
        state = next;
        let mut lg = logits(params, &state.h);
        let next_symbol = if spec.greedy {
            argmax(&lg)
        } else {
            if spec.temperature != 1.0 {
                for x in lg.iter_mut() {
                    *x = *x * inv_temp;
                }
            }
            softmax_in_place(&mut lg);
            sample_categorical(&lg, &mut rng)
        };
        symbols.push(next_symbol);
    }
    NoteSequence::new(symbols)
}

/// One piece per (primer 0..alphabet, repeat 1..=repeats_per_primer), each
/// from its own child seed.
pub fn generate_corpus<T: Scalar>(params: &EmuParams<T>, base: &GenSpec) -> Vec<GeneratedPiece> {
    let repeats = base.repeats_per_primer;
    let mut pieces = Vec::with_capacity(params.alphabet() * repeats);
    for primer in 0..params.alphabet() {
        for repeat in 1..=repeats {
            let seed = child_seed(base.seed, primer, repeat, repeats);
            let spec = GenSpec {
                primer_symbol: primer,
                seed,
                ..base.clone()
            };
            let mut piece = sample_sequence(params, &spec);
            piece.source_id = Some(format!("primer{:02}_take{:02}", primer, repeat));
            pieces.push(GeneratedPiece {
                piece_id: primer * repeats + (repeat - 1),
                primer,
                repeat,
                seed,
                seq: piece,
            });
        }
    }
    pieces
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::ALPHABET_SIZE;
    use std::collections::HashSet;

    #[test]
    fn default_protocol_yields_525_pieces_of_length_70() {
        let params = EmuParams::<f64>::zeros(3, ALPHABET_SIZE);
        let pieces = generate_corpus(&params, &GenSpec::default());
        assert_eq!(pieces.len(), 525);
        assert!(pieces.iter().all(|p| p.seq.len() == 70));
        assert!(pieces
            .iter()
            .all(|p| p.seq.symbols.iter().all(|&s| s < ALPHABET_SIZE)));
    }

    #[test]
    fn single_repeat_yields_one_per_primer() {
        let params = EmuParams::<f64>::zeros(3, ALPHABET_SIZE);
        let spec = GenSpec { repeats_per_primer: 1, length: 8, ..GenSpec::default() };
        let pieces = generate_corpus(&params, &spec);
        assert_eq!(pieces.len(), 35);
        for (primer, piece) in pieces.iter().enumerate() {
            assert_eq!(piece.primer, primer);
            assert_eq!(piece.seq.symbols[0], primer);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let params = EmuParams::<f64>::zeros(4, ALPHABET_SIZE);
        let spec = GenSpec { primer_symbol: 5, length: 40, seed: 99, ..GenSpec::default() };
        assert_eq!(sample_sequence(&params, &spec), sample_sequence(&params, &spec));
        let other = GenSpec { seed: 100, ..spec.clone() };
        assert_ne!(sample_sequence(&params, &spec), sample_sequence(&params, &other));
    }

    #[test]
    fn corpus_pieces_match_standalone_child_runs() {
        let params = EmuParams::<f64>::zeros(3, ALPHABET_SIZE);
        let base = GenSpec { length: 16, seed: 7, repeats_per_primer: 4, ..GenSpec::default() };
        let pieces = generate_corpus(&params, &base);
        let lone = sample_sequence(
            &params,
            &GenSpec {
                primer_symbol: 7,
                seed: child_seed(7, 7, 3, 4),
                ..base.clone()
            },
        );
        let from_corpus = pieces.iter().find(|p| p.primer == 7 && p.repeat == 3).unwrap();
        assert_eq!(from_corpus.seq.symbols, lone.symbols);
    }

    #[test]
    fn child_seeds_are_unique_across_the_corpus() {
        let mut seen = HashSet::new();
        for primer in 0..35 {
            for repeat in 1..=15 {
                assert!(seen.insert(child_seed(42, primer, repeat, 15)));
            }
        }
        assert_eq!(seen.len(), 525);
    }

    #[test]
    fn zero_params_sample_uniformly() {
        let params = EmuParams::<f64>::zeros(3, ALPHABET_SIZE);
        let spec = GenSpec { primer_symbol: 0, length: 10_001, seed: 4, ..GenSpec::default() };
        let seq = sample_sequence(&params, &spec);
        let mut counts = [0usize; ALPHABET_SIZE];
        for &s in &seq.symbols[1..] {
            counts[s] += 1;
        }
        let n = 10_000f64;
        let p = 1.0 / ALPHABET_SIZE as f64;
        let sigma = (p * (1.0 - p) / n).sqrt();
        for (k, &c) in counts.iter().enumerate() {
            let freq = c as f64 / n;
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "symbol {} frequency {} outside 3 sigma of {}",
                k,
                freq,
                p
            );
        }
    }

    #[test]
    fn lower_temperature_reduces_sample_entropy() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(15);
        let params = EmuParams::<f64>::init(6, 12, false, &mut rng);
        let entropy = |temperature: f64| -> f64 {
            let spec = GenSpec {
                primer_symbol: 1,
                length: 4001,
                temperature,
                seed: 11,
                ..GenSpec::default()
            };
            let seq = sample_sequence(&params, &spec);
            let mut counts = vec![0usize; 12];
            for &s in &seq.symbols[1..] {
                counts[s] += 1;
            }
            let n = (seq.len() - 1) as f64;
            counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let f = c as f64 / n;
                    -f * f.ln()
                })
                .sum()
        };
        let slack = 0.05;
        let (cold, warm, hot) = (entropy(0.3), entropy(1.0), entropy(3.0));
        assert!(cold <= warm + slack, "cold {} vs warm {}", cold, warm);
        assert!(warm <= hot + slack, "warm {} vs hot {}", warm, hot);
    }

    #[test]
    fn greedy_decoding_tracks_argmax() {
        let mut params = EmuParams::<f64>::zeros(2, 5);
        // Bias the head so symbol 3 always wins.
        params.b_p[3] = 4.0;
        let spec = GenSpec { primer_symbol: 1, length: 6, greedy: true, ..GenSpec::default() };
        let seq = sample_sequence(&params, &spec);
        assert_eq!(seq.symbols, vec![1, 3, 3, 3, 3, 3]);
    }
}
