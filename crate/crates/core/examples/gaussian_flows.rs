//! KL to the target along the W, FR and WFR flows and their tempered
//! versions, for the two 1D Gaussian targets.
//!
//! cargo run --example gaussian_flows

use wfr_smc::oracle::{evolve, gaussian_kl, FlowKind, GaussianState};
use wfr_smc::schedule::TemperingSchedule;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mu0 = GaussianState::univariate(0.0, 1.0)?;
    let horizon = 5.0;
    let linear = TemperingSchedule::LinearHorizon(horizon);
    let grid = [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0];
    let kinds = [
        FlowKind::W,
        FlowKind::FR,
        FlowKind::WFR,
        FlowKind::TemperedW,
        FlowKind::TemperedFR,
        FlowKind::TemperedWFR,
    ];
    for pi in [GaussianState::univariate(20.0, 0.1)?, GaussianState::univariate(1.0, 5.0)?] {
        println!("pi = N({}, {}), linear schedule over [0, {horizon}]", pi.mean[0], pi.cov[0]);
        print!("{:>6}", "t");
        for k in kinds {
            print!("{:>14}", k.to_string());
        }
        println!();
        let curves = kinds
            .iter()
            .map(|&k| evolve(k, &mu0, &pi, k.is_tempered().then_some(&linear), &grid))
            .collect::<Result<Vec<_>, _>>()?;
        for (i, t) in grid.iter().enumerate() {
            print!("{t:>6}");
            for c in &curves {
                print!("{:>14.4e}", gaussian_kl(&c[i], &pi)?);
            }
            println!();
        }
        println!();
    }
    Ok(())
}
