//! Multinomial and systematic resampling.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::particles::ParticleSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    /// i.i.d. categorical draws.
    #[default]
    Multinomial,
    /// One uniform offset shared by N evenly spaced points.
    Systematic,
}

impl fmt::Display for Resampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resampling::Multinomial => write!(f, "multinomial"),
            Resampling::Systematic => write!(f, "systematic"),
        }
    }
}

impl FromStr for Resampling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "multinomial" => Ok(Resampling::Multinomial),
            "systematic" => Ok(Resampling::Systematic),
            other => Err(format!("unknown resampling scheme `{other}`")),
        }
    }
}

fn cumulative(probabilities: &[f64]) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    let mut cdf = Vec::with_capacity(probabilities.len());
    for p in probabilities {
        if !(p.is_finite() && *p >= 0.0) {
            return Err(Error::DegenerateWeights);
        }
        acc += p;
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(cdf)
}

/// Ancestor indices of `n` draws from a probability vector.
pub fn resample_indices<R: Rng + ?Sized>(
    probabilities: &[f64],
    n: usize,
    scheme: Resampling,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if probabilities.is_empty() {
        return Err(Error::Empty("resampling weights"));
    }
    let cdf = cumulative(probabilities)?;
    let total = *cdf.last().unwrap();
    let last = probabilities.len() - 1;
    // first index whose cumulative weight exceeds u
    let locate = |u: f64| cdf.partition_point(|c| *c <= u).min(last);
    let out = match scheme {
        Resampling::Multinomial => (0..n)
            .map(|_| locate(rng.random::<f64>() * total))
            .collect(),
        Resampling::Systematic => {
            let offset: f64 = rng.random();
            let step = total / n as f64;
            let mut out = Vec::with_capacity(n);
            let mut j = 0;
            for k in 0..n {
                let u = (offset + k as f64) * step;
                while j < last && cdf[j] <= u {
                    j += 1;
                }
                out.push(j);
            }
            out
        }
    };
    Ok(out)
}

/// Draws N particles from the weighted atoms and resets the weights to uniform.
pub fn resample<R: Rng + ?Sized>(ps: &ParticleSystem, scheme: Resampling, rng: &mut R) -> Result<ParticleSystem> {
    let w = ps.normalized_weights()?;
    let idx = resample_indices(&w, ps.len(), scheme, rng)?;
    let d = ps.dim();
    let mut positions = Vec::with_capacity(ps.positions().len());
    for &i in &idx {
        positions.extend_from_slice(ps.particle(i));
    }
    let mut out = ParticleSystem::from_positions(positions, d)?;
    out.iteration = ps.iteration;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn counts(idx: &[usize], n: usize) -> Vec<usize> {
        let mut c = vec![0; n];
        for &i in idx {
            c[i] += 1;
        }
        c
    }

    #[test]
    fn one_hot_copies_single_atom() {
        let mut rng = RngStream::new(1, 0).rng();
        for scheme in [Resampling::Multinomial, Resampling::Systematic] {
            let idx = resample_indices(&[0.0, 0.0, 1.0, 0.0], 4, scheme, &mut rng).unwrap();
            assert_eq!(idx, vec![2; 4]);
        }
    }

    #[test]
    fn systematic_exact_for_multiples_of_one_over_n() {
        let mut rng = RngStream::new(2, 0).rng();
        let w = [0.25, 0.5, 0.0, 0.25];
        for _ in 0..200 {
            let idx = resample_indices(&w, 4, Resampling::Systematic, &mut rng).unwrap();
            assert_eq!(counts(&idx, 4), vec![1, 2, 0, 1]);
        }
        let w = [0.1, 0.3, 0.2, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for _ in 0..200 {
            let idx = resample_indices(&w, 10, Resampling::Systematic, &mut rng).unwrap();
            assert_eq!(&counts(&idx, 10)[..4], &[1, 3, 2, 4]);
        }
    }

    #[test]
    fn degenerate_weights_rejected() {
        let mut rng = RngStream::new(3, 0).rng();
        assert!(resample_indices(&[0.0, 0.0], 2, Resampling::Multinomial, &mut rng).is_err());
        assert!(resample_indices(&[], 2, Resampling::Multinomial, &mut rng).is_err());
        let ps = ParticleSystem::from_positions(vec![0.0, 1.0], 1)
            .unwrap()
            .with_log_weights(vec![f64::NEG_INFINITY; 2])
            .unwrap();
        assert!(resample(&ps, Resampling::Systematic, &mut rng).is_err());
    }

    #[test]
    fn output_is_uniformly_weighted() {
        let mut rng = RngStream::new(4, 0).rng();
        let ps = ParticleSystem::from_positions(vec![0.0, 1.0, 2.0], 1)
            .unwrap()
            .with_log_weights(vec![-1.0, 0.0, 2.0])
            .unwrap();
        let out = resample(&ps, Resampling::Multinomial, &mut rng).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.has_uniform_weights());
    }

    #[test]
    fn multinomial_occupancy_chi_square() {
        // Uniform weights on N = 5 atoms: counts ~ Multinomial(5, 1/5).
        // Pool the per-atom count distribution over 10^4 repetitions and compare
        // with Binomial(5, 1/5) by Pearson chi-square (counts >= 3 merged).
        let n = 5;
        let reps = 10_000;
        let mut rng = RngStream::new(5, 0).rng();
        let w = vec![1.0 / n as f64; n];
        let mut hist = [0usize; 4];
        for _ in 0..reps {
            let idx = resample_indices(&w, n, Resampling::Multinomial, &mut rng).unwrap();
            for c in counts(&idx, n) {
                hist[c.min(3)] += 1;
            }
        }
        let binom = |k: u32| {
            let choose = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0][k as usize];
            choose * 0.2f64.powi(k as i32) * 0.8f64.powi(5 - k as i32)
        };
        let probs = [binom(0), binom(1), binom(2), 1.0 - binom(0) - binom(1) - binom(2)];
        let total = (reps * n) as f64;
        let chi2: f64 = hist
            .iter()
            .zip(probs)
            .map(|(o, p)| (*o as f64 - total * p).powi(2) / (total * p))
            .sum();
        // 3 dof, 99.9% quantile = 16.27; counts within a repetition are dependent,
        // which only shrinks the statistic.
        assert!(chi2 < 16.27, "chi2 = {chi2}, hist = {hist:?}");
    }

    #[test]
    fn parsing() {
        assert_eq!("systematic".parse::<Resampling>().unwrap(), Resampling::Systematic);
        assert!("residual".parse::<Resampling>().is_err());
    }
}
