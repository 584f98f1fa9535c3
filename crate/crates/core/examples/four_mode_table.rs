//! SMC-WFR and both birth-death variants on the four-mode mixture.
//!
//! Defaults to a short run; pass iterations and replicates to go further:
//! cargo run --release --example four_mode_table -- 1000 10

use wfr_smc::harness::{build_evaluator, run_with_evaluator, ExperimentConfig, SamplerKind};
use wfr_smc::targets::TargetPreset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(200);
    let replicates: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(2);
    println!("{:<10} {:>10} {:>10} {:>10} {:>10} {:>8}", "sampler", "mmd^2", "w1_avg", "mse_mean", "mse_cov", "failed");
    for kind in ["smc_wfr", "bdl_pde", "bdl_kl"] {
        let mut c = ExperimentConfig::new(kind.parse::<SamplerKind>()?, TargetPreset::FourMode);
        c.mu0 = TargetPreset::FourModeInit;
        c.n_iterations = iterations;
        c.replicates = replicates;
        c.cadence = 50;
        let s = run_with_evaluator(&c, &build_evaluator(&c)?)?;
        for rep in &s.replicates {
            if let Err(e) = &rep.outcome {
                println!("  {kind} seed {}: {e}", rep.seed);
            }
        }
        println!(
            "{kind:<10} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8}",
            s.aggregate(|r| r.mmd).mean,
            s.aggregate(|r| r.w1_marginal_avg).mean,
            s.aggregate(|r| r.mse_mean).mean,
            s.aggregate(|r| r.mse_cov).mean,
            s.failures()
        );
    }
    Ok(())
}
