//! MMD, marginal W1 and moment errors for exact draws and for a shifted cloud.
//!
//! cargo run --release --example sample_metrics

use wfr_smc::metrics::{mmd_gaussian, moment_mse, w1_marginal_avg, MmdReference};
use wfr_smc::rng::RngStream;
use wfr_smc::targets::{four_mode, Target};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pi = four_mode()?;
    let (mean, cov) = pi.moments();
    let reference = pi.sample_exact(10_000, &mut RngStream::new(1, 0).rng())?;
    let mmd = MmdReference::new(reference.clone(), 2)?;
    let exact = pi.sample_exact(500, &mut RngStream::new(2, 0).rng())?;
    let shifted: Vec<f64> = exact.iter().enumerate().map(|(i, v)| if i % 2 == 1 { v + 1.0 } else { *v }).collect();
    let w = vec![1.0 / 500.0; 500];
    println!("{:<10} {:>10} {:>10} {:>10} {:>10} {:>10}", "cloud", "mmd^2", "mmd", "w1_avg", "mse_mean", "mse_cov");
    for (name, cloud) in [("exact", &exact), ("shifted", &shifted)] {
        let (mm, mc) = moment_mse(cloud, &w, 2, &mean, &cov)?;
        println!(
            "{name:<10} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            mmd.mmd_squared(cloud, &w)?,
            mmd_gaussian(cloud, &w, &reference, 2)?,
            w1_marginal_avg(cloud, &w, &reference, 2)?,
            mm,
            mc
        );
    }
    Ok(())
}
