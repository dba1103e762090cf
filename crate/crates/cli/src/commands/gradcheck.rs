//! `emunet gradcheck`: finite-difference verification of the analytic
//! gradients. Exits nonzero (code 4) on mismatch.

use clap::Args;
use emunet_core::gradcheck::{run as run_check, GradCheckConfig};

use crate::CliError;

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 5)]
    pub hidden: usize,
    #[arg(long, default_value_t = 7)]
    pub alphabet: usize,
    /// Sequence length per instance
    #[arg(long, default_value_t = 6)]
    pub len: usize,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Random instances per lambda
    #[arg(long, default_value_t = 3)]
    pub instances: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0])]
    pub lambdas: Vec<f64>,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = false)]
    pub gate_biases: bool,
    /// Test hook: corrupt one gradient entry, forcing a failure
    #[arg(long, hide = true, default_value_t = false)]
    pub corrupt: bool,
}

pub fn run(args: &GradcheckArgs) -> Result<(), CliError> {
    // Finite differences over every entry scale badly; keep instances small.
    if args.hidden > 16 || args.len > 16 {
        return Err(CliError::Usage(
            "gradcheck guard: --hidden and --len must be at most 16".into(),
        ));
    }
    if args.alphabet == 0 || args.len < 2 {
        return Err(CliError::Usage("--alphabet >= 1 and --len >= 2 required".into()));
    }

    let config = GradCheckConfig {
        hidden: args.hidden,
        alphabet: args.alphabet,
        seq_len: args.len,
        batch_size: args.batch,
        instances: args.instances,
        lambdas: args.lambdas.clone(),
        step: args.step,
        tolerance: args.tolerance,
        seed: args.seed,
        gate_biases: args.gate_biases,
        corrupt: args.corrupt,
    };
    let report = run_check(&config)?;
    for inst in &report.instances {
        println!(
            "h{} a{} T{} λ{:<4} seed {:>20}  max rel err {:.3e} at {:<12} {}",
            inst.hidden,
            inst.alphabet,
            inst.seq_len,
            inst.lambda,
            inst.seed,
            inst.max_rel_err,
            inst.worst_entry,
            if inst.pass { "ok" } else { "FAIL" }
        );
    }
    println!(
        "gradcheck: {} instances, max rel err {:.3e} (tolerance {:.1e}) -> {}",
        report.instances.len(),
        report.max_rel_err,
        config.tolerance,
        if report.pass { "PASS" } else { "FAIL" }
    );
    if !report.pass {
        return Err(CliError::Check(format!(
            "gradient check failed: max rel err {:.3e} exceeds {:.1e}",
            report.max_rel_err, config.tolerance
        )));
    }
    Ok(())
}
