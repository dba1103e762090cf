//! Standing finite-difference verification of the BPTT gradients on
//! randomized small instances: 10 seeds, hidden <= 8, alphabet <= 10,
//! T <= 8, at lambda 0, 0.5 and 1.

use emunet_core::gradcheck::{
    check_instance, finite_difference_grads, max_absolute_error, richardson_grads,
};
use emunet_core::num::mix64;
use emunet_core::train::backward;
use emunet_core::EmuParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradients_match_finite_differences_across_seeds() {
    let mut dims_rng = ChaCha8Rng::seed_from_u64(0xB0A7);
    let mut worst = (0.0f64, String::new());
    for i in 0..10u64 {
        let hidden = dims_rng.gen_range(2..=8);
        let alphabet = dims_rng.gen_range(3..=10);
        let seq_len = dims_rng.gen_range(2..=8);
        let batch = dims_rng.gen_range(1..=2);
        let seed = mix64(i);
        for lambda in [0.0, 0.5, 1.0] {
            let report = check_instance(
                hidden, alphabet, seq_len, batch, false, lambda, 1e-6, 1e-5, seed, false,
            )
            .unwrap();
            assert!(
                report.pass,
                "seed {} h{} a{} T{} λ{}: rel err {} at {}",
                seed, hidden, alphabet, seq_len, lambda, report.max_rel_err, report.worst_entry
            );
            if report.max_rel_err > worst.0 {
                worst = (report.max_rel_err, report.worst_entry);
            }
        }
    }
    assert!(worst.0 < 1e-5, "worst {} at {}", worst.0, worst.1);
}

#[test]
fn analytic_gradients_are_absolutely_exact_against_richardson() {
    // Richardson extrapolation cancels the O(h^2) truncation term, leaving
    // ~1e-12 noise; agreement at 1e-9 absolute pins the backward pass far
    // below anything a real bug could produce.
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    for lambda in [0.0, 0.5, 1.0] {
        let params = EmuParams::<f64>::init(6, 9, false, &mut rng);
        let seq: Vec<usize> = (0..7).map(|_| rng.gen_range(0..9)).collect();
        let batch: Vec<&[usize]> = vec![&seq];
        let (_, analytic) = backward(&params, &batch, lambda).unwrap();
        let oracle = richardson_grads(&params, &batch, lambda, 2e-4).unwrap();
        let (abs, at) = max_absolute_error(&analytic, &oracle);
        assert!(abs < 1e-9, "λ {}: abs err {} at {}", lambda, abs, at);
    }
}

#[test]
fn plain_central_difference_at_spec_step_agrees_absolutely() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let params = EmuParams::<f64>::init(5, 7, false, &mut rng);
    let seq: Vec<usize> = (0..6).map(|_| rng.gen_range(0..7)).collect();
    let batch: Vec<&[usize]> = vec![&seq];
    let (_, analytic) = backward(&params, &batch, 0.5).unwrap();
    let fd = finite_difference_grads(&params, &batch, 0.5, 1e-6).unwrap();
    let (abs, at) = max_absolute_error(&analytic, &fd);
    // Bounded by the f64 central-difference noise floor.
    assert!(abs < 5e-9, "abs err {} at {}", abs, at);
}
