//! Markov proposal kernels: (tempered) unadjusted Langevin and random walk Metropolis.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::particles::ParticleSystem;
use crate::targets::{tempered_grad, GeometricPathTarget, Target};

fn check_target(ps: &ParticleSystem, target: &dyn Target) -> Result<()> {
    if ps.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: ps.dim(),
        });
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    Ok(())
}

/// Standard normal noise for every coordinate of every particle, drawn in particle order.
pub fn draw_noise<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Drift points `x + gamma * grad(x)` for a gradient callback.
fn drift_points(
    ps: &ParticleSystem,
    gamma: f64,
    mut grad: impl FnMut(&[f64], &mut [f64]),
) -> Result<Vec<f64>> {
    let d = ps.dim();
    let mut out = ps.positions().to_vec();
    let mut g = vec![0.0; d];
    for (i, row) in out.chunks_exact_mut(d).enumerate() {
        grad(ps.particle(i), &mut g);
        for k in 0..d {
            row[k] += gamma * g[k];
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: i,
                iteration: ps.iteration,
            });
        }
    }
    Ok(out)
}

fn apply_noise(ps: &ParticleSystem, drift: &[f64], gamma: f64, noise: &[f64]) -> Result<ParticleSystem> {
    if noise.len() != drift.len() {
        return Err(Error::DimensionMismatch {
            expected: drift.len(),
            got: noise.len(),
        });
    }
    let scale = (2.0 * gamma).sqrt();
    let mut next = ps.clone();
    for (k, (x, (m, z))) in next
        .positions_mut()
        .iter_mut()
        .zip(drift.iter().zip(noise))
        .enumerate()
    {
        *x = m + scale * z;
        if !x.is_finite() {
            return Err(Error::NonFinite {
                index: k / ps.dim(),
                iteration: ps.iteration,
            });
        }
    }
    Ok(next)
}

/// One ULA move with caller-supplied standard normal noise.
///
/// Returns the moved system (weights untouched) and the pre-noise drift points.
pub fn ula_step_with_noise(
    ps: &ParticleSystem,
    target: &dyn Target,
    gamma: f64,
    noise: &[f64],
) -> Result<(ParticleSystem, Vec<f64>)> {
    check_target(ps, target)?;
    check_gamma(gamma)?;
    let drift = drift_points(ps, gamma, |x, g| target.grad_log_density(x, g))?;
    let next = apply_noise(ps, &drift, gamma, noise)?;
    Ok((next, drift))
}

/// `x <- x + gamma grad log pi(x) + sqrt(2 gamma) xi` for every particle.
pub fn ula_step<R: Rng + ?Sized>(
    ps: &ParticleSystem,
    target: &dyn Target,
    gamma: f64,
    rng: &mut R,
) -> Result<(ParticleSystem, Vec<f64>)> {
    let noise = draw_noise(ps.positions().len(), rng);
    ula_step_with_noise(ps, target, gamma, &noise)
}

/// Tempered ULA move with caller-supplied noise; the drift follows
/// `(1 - lambda) grad log base + lambda grad log tip`.
pub fn tempered_ula_step_with_noise(
    ps: &ParticleSystem,
    base: &dyn Target,
    tip: &dyn Target,
    lambda: f64,
    gamma: f64,
    noise: &[f64],
) -> Result<(ParticleSystem, Vec<f64>)> {
    check_target(ps, tip)?;
    check_target(ps, base)?;
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid("lambda", format!("must lie in [0, 1], got {lambda}")));
    }
    let drift = drift_points(ps, gamma, |x, g| tempered_grad(base, tip, lambda, x, g))?;
    let next = apply_noise(ps, &drift, gamma, noise)?;
    Ok((next, drift))
}

pub fn tempered_ula_step<R: Rng + ?Sized>(
    ps: &ParticleSystem,
    base: &dyn Target,
    tip: &dyn Target,
    lambda: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<(ParticleSystem, Vec<f64>)> {
    let noise = draw_noise(ps.positions().len(), rng);
    tempered_ula_step_with_noise(ps, base, tip, lambda, gamma, &noise)
}

/// Metropolis acceptance probability `min(1, eta(proposal) / eta(current))` from log-densities.
pub fn metropolis_acceptance(log_current: f64, log_proposal: f64) -> f64 {
    if log_proposal >= log_current {
        1.0
    } else {
        (log_proposal - log_current).exp()
    }
}

/// One random walk Metropolis sweep leaving `invariant` unchanged.
///
/// Each particle proposes `x + sigma xi` and accepts with the Metropolis rule.
/// Returns the new system and the number of accepted moves.
pub fn rwm_step<R: Rng + ?Sized>(
    ps: &ParticleSystem,
    invariant: &GeometricPathTarget<'_>,
    sigma: f64,
    rng: &mut R,
) -> Result<(ParticleSystem, usize)> {
    check_target(ps, invariant)?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid("rwm_sigma", format!("must be positive, got {sigma}")));
    }
    let d = ps.dim();
    let mut next = ps.clone();
    let mut proposal = vec![0.0; d];
    let mut accepted = 0;
    for i in 0..ps.len() {
        let current = ps.particle(i);
        for k in 0..d {
            proposal[k] = current[k] + sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let log_u: f64 = rng.random::<f64>().ln();
        let log_ratio = invariant.log_density(&proposal) - invariant.log_density(current);
        if log_u < log_ratio {
            next.positions_mut()[i * d..(i + 1) * d].copy_from_slice(&proposal);
            accepted += 1;
        }
    }
    Ok((next, accepted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::GaussianTarget;

    fn single(x: f64) -> ParticleSystem {
        ParticleSystem::from_positions(vec![x], 1).unwrap()
    }

    #[test]
    fn ula_without_noise() {
        let pi = GaussianTarget::univariate(0.0, 1.0).unwrap();
        let (next, drift) = ula_step_with_noise(&single(1.0), &pi, 0.1, &[0.0]).unwrap();
        assert!((drift[0] - 0.9).abs() < 1e-15);
        assert!((next.positions()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn ula_fixed_at_mode() {
        let pi = GaussianTarget::new(vec![1.0, 2.0], vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let ps = ParticleSystem::from_positions(vec![1.0, 2.0], 2).unwrap();
        let (next, _) = ula_step_with_noise(&ps, &pi, 0.3, &[0.0, 0.0]).unwrap();
        assert_eq!(next.positions(), &[1.0, 2.0]);
    }

    #[test]
    fn ula_tiny_step_is_near_identity() {
        let pi = GaussianTarget::univariate(3.0, 0.5).unwrap();
        let (next, _) = ula_step_with_noise(&single(-2.0), &pi, 1e-14, &[0.0]).unwrap();
        assert!((next.positions()[0] + 2.0).abs() < 1e-12);
        assert!(ula_step_with_noise(&single(0.0), &pi, 0.0, &[0.0]).is_err());
    }

    #[test]
    fn non_finite_gradient_names_particle() {
        let pi = GaussianTarget::univariate(0.0, 1e-300).unwrap();
        let ps = ParticleSystem::from_positions(vec![0.0, 1e10], 1).unwrap();
        let err = ula_step_with_noise(&ps, &pi, 1.0, &[0.0, 0.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { index: 1, iteration: 0 });
    }

    #[test]
    fn tempered_drift_examples() {
        let mu0 = GaussianTarget::univariate(0.0, 1.0).unwrap();
        let pi = GaussianTarget::univariate(4.0, 1.0).unwrap();
        let (x, _) = tempered_ula_step_with_noise(&single(2.0), &mu0, &pi, 0.0, 0.1, &[0.0]).unwrap();
        assert!((x.positions()[0] - 1.8).abs() < 1e-15);
        let (x, _) = tempered_ula_step_with_noise(&single(0.0), &mu0, &pi, 0.5, 0.1, &[0.0]).unwrap();
        assert!((x.positions()[0] - 0.2).abs() < 1e-15);
        assert!(tempered_ula_step_with_noise(&single(0.0), &mu0, &pi, 1.5, 0.1, &[0.0]).is_err());
    }

    #[test]
    fn tempered_endpoint_is_bit_identical() {
        use crate::rng::RngStream;
        let mu0 = GaussianTarget::univariate(0.0, 1.0).unwrap();
        let pi = GaussianTarget::univariate(20.0, 0.1).unwrap();
        let ps = ParticleSystem::from_positions(vec![0.3, -1.2, 2.5, 7.0], 1).unwrap();
        let a = ula_step(&ps, &pi, 0.05, &mut RngStream::new(4, 0).rng()).unwrap();
        let b = tempered_ula_step(&ps, &mu0, &pi, 1.0, 0.05, &mut RngStream::new(4, 0).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn metropolis_rule() {
        assert_eq!(metropolis_acceptance(-1.0, -0.5), 1.0);
        assert_eq!(metropolis_acceptance(-1.0, -1.0), 1.0);
        let a = metropolis_acceptance(0.0, -2.0);
        assert!((a - (-2f64).exp()).abs() < 1e-15 && a < 1.0);
    }

    #[test]
    fn rwm_rejects_bad_sigma_and_keeps_size() {
        use crate::rng::RngStream;
        let mu0 = GaussianTarget::univariate(0.0, 1.0).unwrap();
        let pi = GaussianTarget::univariate(2.0, 1.0).unwrap();
        let path = GeometricPathTarget::new(&mu0, &pi, 0.5).unwrap();
        let ps = ParticleSystem::from_positions(vec![0.0; 50], 1).unwrap();
        let mut rng = RngStream::new(2, 0).rng();
        assert!(rwm_step(&ps, &path, 0.0, &mut rng).is_err());
        let (next, acc) = rwm_step(&ps, &path, 0.5, &mut rng).unwrap();
        assert_eq!(next.len(), 50);
        assert!(acc > 0 && acc <= 50);
    }
}
