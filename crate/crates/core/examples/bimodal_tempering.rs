//! Iterations until MMD^2 < 0.01 on the mixture N(0,1)/2 + N(m,1)/2 for
//! SMC-WFR and ULA, untempered and with three tempering schedules.
//!
//! cargo run --release --example bimodal_tempering -- 4

use std::ops::ControlFlow;

use wfr_smc::metrics::MmdReference;
use wfr_smc::rng::RngStream;
use wfr_smc::schedule::TemperingSchedule;
use wfr_smc::smc::{run, Algorithm, SamplerConfig};
use wfr_smc::targets::{bimodal, GaussianTarget, Target};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m: f64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(4.0);
    let pi = bimodal(m)?;
    let mu0 = GaussianTarget::univariate(0.0, 1.0)?;
    let reference = MmdReference::new(pi.sample_exact(2000, &mut RngStream::new(99, 0).rng())?, 1)?;
    let gamma = 0.1;
    println!("m = {m}");
    for (alg, tempered, steps) in [
        (Algorithm::SmcWfr, Algorithm::TemperedSmcWfr, 200),
        (Algorithm::Ula, Algorithm::TemperedUla, 2000),
    ] {
        let schedules = [
            TemperingSchedule::constant_one(),
            TemperingSchedule::LinearHorizon(steps as f64 * gamma),
            TemperingSchedule::Exponential(0.01),
            TemperingSchedule::OptimalOneOver,
        ];
        for sched in schedules {
            let a = if sched.is_constant_one() { alg } else { tempered };
            let cfg = SamplerConfig::new(500, steps, gamma)?.with_schedule(sched);
            let hits: Vec<String> = (0..5)
                .map(|seed| {
                    let mut hit = None;
                    run(a, &cfg, &mu0, &pi, &mut RngStream::new(seed, 0).rng(), &mut |ps| {
                        let w = ps.normalized_weights().unwrap();
                        if reference.mmd_squared(ps.positions(), &w).unwrap() < 0.01 {
                            hit = Some(ps.iteration);
                            return ControlFlow::Break(());
                        }
                        ControlFlow::Continue(())
                    })
                    .unwrap();
                    hit.map_or("-".into(), |i| i.to_string())
                })
                .collect();
            println!("{:<40} {}", format!("{a} [{sched}]"), hits.join(" "));
        }
    }
    Ok(())
}
