use emunet_core::cell::forward_sequence;
use emunet_core::encoding::NoteSequence;
use emunet_core::train::{train, TrainConfig};

fn windowed_accuracy(params: &emunet_core::EmuParamsF64, symbols: &[usize], window: usize) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut start = 0;
    while start + 2 <= symbols.len() {
        let end = (start + window).min(symbols.len());
        let w = &symbols[start..end];
        let fwd = forward_sequence(params, w).unwrap();
        for t in 0..w.len() - 1 {
            let p = &fwd.probs[t];
            let argmax = p.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            if argmax == w[t + 1] { correct += 1; }
            total += 1;
        }
        start += window;
    }
    correct as f64 / total as f64
}

fn main() {
    let scale: Vec<usize> = vec![1, 3, 5, 7, 9, 11, 13, 15];
    //

    //

    // Variant A: long sequences (16 cycles), accuracy within 16-step windows
    let mut long = Vec::new();
    for _ in 0..16 { long.extend(&scale); }
    let corpus_a: Vec<NoteSequence> = (0..6).map(|_| NoteSequence::new(long.clone())).collect();
    // Variant B: corpus of 16-step sequences (2 cycles)
    let mut short = Vec::new();
    for _ in 0..2 { short.extend(&scale); }
    let corpus_b: Vec<NoteSequence> = (0..6).map(|_| NoteSequence::new(short.clone())).collect();

    for (name, corpus) in [("A long", &corpus_a), ("B short", &corpus_b)] {
        for seed in [0u64, 1, 2] {
            let config = TrainConfig {
                iterations: 500, batch_size: 16, hidden: 16, unroll_length: 16,
                seed, ..TrainConfig::default()
            };
            let outcome = train::<f64>(&config, corpus).unwrap();
            let first = outcome.curve[0].l_e;
            let last = outcome.curve.last().unwrap().l_e;
            let acc = windowed_accuracy(&outcome.params, &corpus[0].symbols, 16);
            println!("{} seed {}: l_e {:.4}->{:.4} ({:.0}% drop), windowed acc {:.1}%",
                     name, seed, first, last, 100.0*(1.0-last/first), 100.0*acc);
        }
    }
}
