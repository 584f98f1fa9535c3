//! SMC-WFR on a 1D Gaussian target next to the exact WFR moments.
//!
//! The gap in the variance is the bias of the unadjusted Langevin step, which
//! the reweighting only partly removes at this step size.
//!
//! cargo run --release --example smc_wfr_tracking

use std::ops::ControlFlow;

use wfr_smc::oracle::{closed_form, FlowKind, GaussianState};
use wfr_smc::rng::RngStream;
use wfr_smc::smc::{run, Algorithm, SamplerConfig};
use wfr_smc::targets::GaussianTarget;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mu0 = GaussianTarget::univariate(0.0, 1.0)?;
    let pi = GaussianTarget::univariate(20.0, 0.1)?;
    let (m0, p) = (GaussianState::from_target(&mu0), GaussianState::from_target(&pi));
    for gamma in [0.05, 0.01] {
        let steps = (5.0 / gamma) as usize;
        let cfg = SamplerConfig::new(2000, steps, gamma)?;
        println!("gamma = {gamma}");
        println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>6}", "t", "mean", "exact", "var", "exact", "ess");
        let mut rng = RngStream::new(1, 0).rng();
        run(Algorithm::SmcWfr, &cfg, &mu0, &pi, &mut rng, &mut |ps| {
            let t = ps.iteration as f64 * gamma;
            if [0.1, 0.5, 1.0, 2.0, 5.0].iter().any(|s| (s - t).abs() < 1e-9) {
                let (m, c) = ps.weighted_moments().unwrap();
                let e = closed_form(FlowKind::WFR, &m0, &p, None, t).unwrap().unwrap();
                let ess = ps.ess().unwrap() / ps.len() as f64;
                println!("{t:>6} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {ess:>6.2}", m[0], e.mean[0], c[0], e.cov[0]);
            }
            ControlFlow::Continue(())
        })?;
    }
    Ok(())
}
