//! Birth-death Langevin on a well-conditioned bimodal target, compared with
//! plain Langevin from the same start.
//!
//! cargo run --release --example birth_death

use std::ops::ControlFlow;

use wfr_smc::bdl::{run_bdl, BdlConfig, RateVariant};
use wfr_smc::metrics::{Evaluator, MmdForm, MmdReference};
use wfr_smc::rng::RngStream;
use wfr_smc::targets::{bimodal, GaussianTarget, Target};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pi = bimodal(5.0)?;
    let mu0 = GaussianTarget::univariate(0.0, 1.0)?;
    let reference = MmdReference::new(pi.sample_exact(4000, &mut RngStream::new(3, 9).rng())?, 1)?;
    let (m, c) = pi.moments();
    let eval = Evaluator::new(reference, m, c, MmdForm::Squared)?;
    for (label, variant, birth_death) in [
        ("langevin only", RateVariant::Pde, false),
        ("bdl pde", RateVariant::Pde, true),
        ("bdl kl", RateVariant::Kl, true),
    ] {
        let mut cfg = BdlConfig::new(400, 300, 0.05, variant)?;
        cfg.birth_death = birth_death;
        run_bdl(&cfg, &mu0, &pi, &mut RngStream::new(0, 0).rng(), &mut |ps| {
            if ps.iteration % 100 == 0 {
                let r = eval.report(ps, 0.0).unwrap();
                println!("{label:<14} it {:>4}  mmd^2 {:.4}  mse_mean {:.4}", r.iteration, r.mmd, r.mse_mean);
            }
            ControlFlow::Continue(())
        })?;
    }
    Ok(())
}
