//! Tempering SMC against tempered SMC-WFR, both following a linear schedule,
//! with the tempered-WFR moment flow as reference.
//!
//! cargo run --release --example tempered_smc

use std::ops::ControlFlow;

use wfr_smc::oracle::{evolve, gaussian_kl, FlowKind, GaussianState};
use wfr_smc::rng::RngStream;
use wfr_smc::schedule::TemperingSchedule;
use wfr_smc::smc::{run, Algorithm, SamplerConfig};
use wfr_smc::targets::GaussianTarget;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mu0 = GaussianTarget::univariate(0.0, 1.0)?;
    let pi = GaussianTarget::univariate(20.0, 0.1)?;
    let pi_state = GaussianState::from_target(&pi);
    let horizon = 2.0;
    let sched = TemperingSchedule::LinearHorizon(horizon);
    let report = [0.25, 0.5, 1.0, 1.5, 2.0];
    let exact = evolve(FlowKind::TemperedWFR, &GaussianState::from_target(&mu0), &pi_state, Some(&sched), &report)?;
    for gamma in [0.01, 0.1] {
        let steps = (horizon / gamma).round() as usize;
        let cfg = SamplerConfig::new(1000, steps, gamma)?.with_schedule(sched);
        println!("gamma = {gamma}");
        println!("{:>6} {:>14} {:>18} {:>14}", "t", "tempering_smc", "tempered_smc_wfr", "exact");
        let mut rows = vec![[f64::NAN; 2]; report.len()];
        for (col, alg) in [Algorithm::TemperingSmc, Algorithm::TemperedSmcWfr].into_iter().enumerate() {
            let mut rng = RngStream::new(7, 0).rng();
            run(alg, &cfg, &mu0, &pi, &mut rng, &mut |ps| {
                let t = ps.iteration as f64 * gamma;
                if let Some(i) = report.iter().position(|s| (s - t).abs() < 1e-9) {
                    let (m, c) = ps.weighted_moments().unwrap();
                    let fit = GaussianState::univariate(m[0], c[0]).unwrap();
                    rows[i][col] = gaussian_kl(&fit, &pi_state).unwrap();
                }
                ControlFlow::Continue(())
            })?;
        }
        for (i, t) in report.iter().enumerate() {
            println!("{t:>6} {:>14.3} {:>18.3} {:>14.3}", rows[i][0], rows[i][1], gaussian_kl(&exact[i], &pi_state)?);
        }
    }
    Ok(())
}
