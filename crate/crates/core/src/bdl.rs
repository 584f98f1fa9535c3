//! Birth-death Langevin: ULA moves plus kill / duplicate events at rates
//! estimated with a Gaussian kernel density estimate.

use std::f64::consts::PI;
use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::particles::{ParticleSystem, StepSize};
use crate::smc::{draw_noise, ula_step_with_noise};
use crate::targets::Target;
use crate::weights::logsumexp;

const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateVariant {
    /// Centered rate `beta_i - mean(beta)`.
    #[default]
    Pde,
    /// Centered rate plus the kernel-normalized correction `sum_j K_ij / S_j - 1`.
    Kl,
}

impl fmt::Display for RateVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateVariant::Pde => "pde",
            RateVariant::Kl => "kl",
        })
    }
}

impl FromStr for RateVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "pde" => Ok(RateVariant::Pde),
            "kl" => Ok(RateVariant::Kl),
            other => Err(format!("unknown rate variant `{other}` (expected pde or kl)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BdlConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    pub gamma: StepSize,
    /// Standard deviation of the isotropic Gaussian kernel.
    pub kde_bandwidth: f64,
    pub rate_variant: RateVariant,
    /// When false only the Langevin moves run.
    pub birth_death: bool,
}

impl BdlConfig {
    /// Bandwidth defaults to `h = gamma`.
    pub fn new(n_particles: usize, n_iterations: usize, gamma: f64, rate_variant: RateVariant) -> Result<Self> {
        let c = Self {
            n_particles,
            n_iterations,
            gamma: StepSize::new(gamma)?,
            kde_bandwidth: gamma,
            rate_variant,
            birth_death: true,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(invalid("n_particles", "birth-death needs at least 2 particles"));
        }
        check_bandwidth(self.kde_bandwidth)
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid("kde_bandwidth", format!("must be positive, got {h}")));
    }
    Ok(())
}

fn log_kernel_norm(d: usize, h: f64) -> f64 {
    -0.5 * d as f64 * (2.0 * PI * h * h).ln()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `log(N^{-1} sum_j K_h(x - x_j))` with `K_h` the `N(0, h^2 I)` density.
pub fn kde_log_density(x: &[f64], particles: &[f64], h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    let d = x.len();
    if d == 0 || particles.is_empty() {
        return Err(Error::Empty("kde particles"));
    }
    if particles.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: particles.len() % d,
        });
    }
    let n = particles.len() / d;
    let inv = -0.5 / (h * h);
    let e: Vec<f64> = particles.chunks_exact(d).map(|p| inv * sq_dist(x, p)).collect();
    Ok(logsumexp(&e) - (n as f64).ln() + log_kernel_norm(d, h))
}

/// Row sums `S_i = sum_j exp(-|x_i - x_j|^2 / (2 h^2))`; each is at least 1.
fn kernel_row_sums(positions: &[f64], d: usize, h: f64) -> Vec<f64> {
    let n = positions.len() / d;
    let inv = -0.5 / (h * h);
    let mut out = vec![0.0; n];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, block)| {
        for (k, s) in block.iter_mut().enumerate() {
            let i = c * CHUNK + k;
            let xi = &positions[i * d..(i + 1) * d];
            *s = positions.chunks_exact(d).map(|xj| (inv * sq_dist(xi, xj)).exp()).sum();
        }
    });
    out
}

/// Centered birth-death rates at the current particle positions.
pub fn bdl_rates(positions: &[f64], dim: usize, target: &dyn Target, h: f64, variant: RateVariant) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    if positions.is_empty() {
        return Err(Error::Empty("particle positions"));
    }
    if dim != target.dim() || positions.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: dim,
        });
    }
    let n = positions.len() / dim;
    let sums = kernel_row_sums(positions, dim, h);
    let offset = log_kernel_norm(dim, h) - (n as f64).ln();
    let beta: Vec<f64> = sums
        .iter()
        .zip(positions.chunks_exact(dim))
        .map(|(s, x)| s.ln() + offset - target.log_density(x))
        .collect();
    let mean = beta.iter().sum::<f64>() / n as f64;
    let mut rates: Vec<f64> = beta.iter().map(|b| b - mean).collect();
    if variant == RateVariant::Kl {
        let inv = -0.5 / (h * h);
        let mut corr = vec![0.0; n];
        corr.par_chunks_mut(CHUNK).enumerate().for_each(|(c, block)| {
            for (k, v) in block.iter_mut().enumerate() {
                let i = c * CHUNK + k;
                let xi = &positions[i * dim..(i + 1) * dim];
                *v = positions
                    .chunks_exact(dim)
                    .zip(&sums)
                    .map(|(xj, s)| (inv * sq_dist(xi, xj)).exp() / s)
                    .sum::<f64>()
                    - 1.0;
            }
        });
        for (r, c) in rates.iter_mut().zip(corr) {
            *r += c;
        }
    }
    Ok(rates)
}

/// Kill / duplicate sweep in particle order followed by uniform restoration to `target_size`.
///
/// Particle `i` dies with probability `1 - exp(-rate_i gamma)` when its rate
/// is positive and is duplicated with probability `1 - exp(rate_i gamma)`
/// otherwise. Restoration kills or duplicates uniformly chosen particles
/// without replacement; when more duplicates are needed than particles exist,
/// further rounds draw again from the survivors.
pub fn birth_death_sweep<R: Rng>(
    positions: &[f64],
    dim: usize,
    rates: &[f64],
    gamma: f64,
    target_size: usize,
    iteration: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = positions.len() / dim;
    if rates.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rates.len(),
        });
    }
    let mut rows: Vec<usize> = Vec::with_capacity(2 * n);
    for (i, &r) in rates.iter().enumerate() {
        let u: f64 = rng.random();
        if r > 0.0 {
            let p_kill = -(-r * gamma).exp_m1();
            if u >= p_kill {
                rows.push(i);
            }
        } else {
            rows.push(i);
            let p_dup = -(r * gamma).exp_m1();
            if u < p_dup {
                rows.push(i);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::PopulationCollapse { iteration });
    }
    if rows.len() > target_size {
        let excess = rows.len() - target_size;
        let mut drop = vec![false; rows.len()];
        for k in sample(rng, rows.len(), excess) {
            drop[k] = true;
        }
        rows = rows.into_iter().zip(drop).filter(|(_, d)| !d).map(|(r, _)| r).collect();
    } else if rows.len() < target_size {
        let base = rows.clone();
        let mut missing = target_size - rows.len();
        while missing > 0 {
            let k = missing.min(base.len());
            for j in sample(rng, base.len(), k) {
                rows.push(base[j]);
            }
            missing -= k;
        }
    }
    let mut out = Vec::with_capacity(target_size * dim);
    for r in rows {
        out.extend_from_slice(&positions[r * dim..(r + 1) * dim]);
    }
    Ok(out)
}

/// One BDL iteration: Langevin move, rate estimation, birth-death sweep.
///
/// The Langevin noise is drawn before any birth-death randomness, so with the
/// birth-death stage disabled the step consumes the generator exactly like a
/// plain ULA step.
pub fn bdl_step<R: Rng>(
    ps: &ParticleSystem,
    target: &dyn Target,
    gamma: f64,
    h: f64,
    variant: RateVariant,
    rng: &mut R,
) -> Result<ParticleSystem> {
    step(ps, target, gamma, h, variant, true, rng)
}

fn step<R: Rng>(
    ps: &ParticleSystem,
    target: &dyn Target,
    gamma: f64,
    h: f64,
    variant: RateVariant,
    birth_death: bool,
    rng: &mut R,
) -> Result<ParticleSystem> {
    if ps.len() < 2 {
        return Err(invalid("n_particles", "birth-death needs at least 2 particles"));
    }
    check_bandwidth(h)?;
    let noise = draw_noise(ps.positions().len(), rng);
    let (moved, _) = ula_step_with_noise(ps, target, gamma, &noise)?;
    if !birth_death {
        return Ok(moved);
    }
    let d = ps.dim();
    let rates = bdl_rates(moved.positions(), d, target, h, variant)?;
    let positions = birth_death_sweep(moved.positions(), d, &rates, gamma, ps.len(), ps.iteration + 1, rng)?;
    let mut out = ParticleSystem::from_positions(positions, d)?;
    out.iteration = ps.iteration;
    Ok(out)
}

/// Runs BDL from exact draws of `mu0`; `observer` sees every iteration including the initial cloud.
pub fn run_bdl<R: Rng>(
    config: &BdlConfig,
    mu0: &dyn Target,
    pi: &dyn Target,
    rng: &mut R,
    observer: &mut dyn FnMut(&ParticleSystem) -> ControlFlow<()>,
) -> Result<ParticleSystem> {
    config.validate()?;
    if mu0.dim() != pi.dim() {
        return Err(Error::DimensionMismatch {
            expected: pi.dim(),
            got: mu0.dim(),
        });
    }
    let positions = mu0.sample_exact(config.n_particles, rng)?;
    let mut ps = ParticleSystem::from_positions(positions, mu0.dim())?;
    if observer(&ps).is_break() {
        return Ok(ps);
    }
    for n in 1..=config.n_iterations {
        let mut next = step(
            &ps,
            pi,
            config.gamma.get(),
            config.kde_bandwidth,
            config.rate_variant,
            config.birth_death,
            rng,
        )?;
        next.iteration = n;
        ps = next;
        if observer(&ps).is_break() {
            break;
        }
    }
    Ok(ps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::smc::{run_ula_baseline, SamplerConfig};
    use crate::targets::GaussianTarget;

    #[test]
    fn kde_single_particle_and_symmetry() {
        let h = 0.3;
        let v = kde_log_density(&[1.0], &[1.0], h).unwrap();
        assert!((v - log_kernel_norm(1, h)).abs() < 1e-14);
        let a = 0.7;
        let v = kde_log_density(&[0.0], &[-a, a], h).unwrap();
        let k = log_kernel_norm(1, h) - a * a / (2.0 * h * h);
        assert!((v - k).abs() < 1e-14);
        assert!(kde_log_density(&[0.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn kde_flattens_with_bandwidth() {
        let grid: Vec<f64> = (0..21).map(|i| i as f64 * 0.5 - 5.0).collect();
        let spread = |h: f64| {
            let vals: Vec<f64> = [-4.0, -1.3, 0.0, 2.2, 4.9]
                .iter()
                .map(|x| kde_log_density(&[*x], &grid, h).unwrap())
                .collect();
            vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min)
        };
        let mut prev = spread(2.0);
        for h in [4.0, 8.0, 16.0] {
            let s = spread(h);
            assert!(s < prev, "{s} !< {prev}");
            prev = s;
        }
    }

    #[test]
    fn rates_center_and_cancel_constants() {
        let pi = GaussianTarget::univariate(0.0, 1.0).unwrap();
        assert_eq!(bdl_rates(&[0.3], 1, &pi, 0.1, RateVariant::Pde).unwrap(), vec![0.0]);
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.77).sin() * 2.0).collect();
        for variant in [RateVariant::Pde, RateVariant::Kl] {
            let r = bdl_rates(&xs, 1, &pi, 0.2, variant).unwrap();
            assert!(r.iter().sum::<f64>().abs() < 1e-10, "{variant}");
        }
        let shifted = crate::targets::GaussianMixtureTarget::new(vec![1.0], vec![pi.clone()]).unwrap();
        let a = bdl_rates(&xs, 1, &pi, 0.2, RateVariant::Pde).unwrap();
        let b = bdl_rates(&xs, 1, &shifted, 0.2, RateVariant::Pde).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn sweep_keeps_population_and_kills_huge_rates() {
        let mut rng = RngStream::new(5, 0).rng();
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        for _ in 0..50 {
            let mut rates = vec![0.1; 10];
            rates[3] = 1e6;
            let out = birth_death_sweep(&xs, 1, &rates, 0.1, 10, 1, &mut rng).unwrap();
            assert_eq!(out.len(), 10);
            assert!(!out.contains(&3.0));
        }
        let out = birth_death_sweep(&xs, 1, &[0.0; 10], 0.1, 10, 1, &mut rng).unwrap();
        assert_eq!(out, xs);
        assert_eq!(
            birth_death_sweep(&xs, 1, &[1e6; 10], 0.1, 10, 7, &mut rng).unwrap_err(),
            Error::PopulationCollapse { iteration: 7 }
        );
    }

    #[test]
    fn disabled_birth_death_matches_ula() {
        let mu0 = GaussianTarget::univariate(0.0, 1.0).unwrap();
        let pi = GaussianTarget::univariate(3.0, 0.5).unwrap();
        let mut cfg = BdlConfig::new(25, 15, 0.05, RateVariant::Pde).unwrap();
        cfg.birth_death = false;
        let mut bdl = Vec::new();
        run_bdl(&cfg, &mu0, &pi, &mut RngStream::new(8, 0).rng(), &mut |ps| {
            bdl.push(ps.clone());
            ControlFlow::Continue(())
        })
        .unwrap();
        let ula = run_ula_baseline(
            &SamplerConfig::new(25, 15, 0.05).unwrap(),
            &mu0,
            &pi,
            &mut RngStream::new(8, 0).rng(),
        )
        .unwrap();
        assert_eq!(bdl, ula.states);
    }

    #[test]
    fn population_is_constant() {
        let mu0 = GaussianTarget::univariate(0.0, 1.0).unwrap();
        let pi = GaussianTarget::univariate(3.0, 0.5).unwrap();
        for variant in [RateVariant::Pde, RateVariant::Kl] {
            let cfg = BdlConfig::new(40, 20, 0.05, variant).unwrap();
            run_bdl(&cfg, &mu0, &pi, &mut RngStream::new(1, 0).rng(), &mut |ps| {
                assert_eq!(ps.len(), 40);
                ControlFlow::Continue(())
            })
            .unwrap();
        }
    }
}
