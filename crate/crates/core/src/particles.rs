use crate::error::{invalid, Error, Result};
use crate::weights::{effective_sample_size, normalize_log_weights};

/// Time step of a flow discretisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize(f64);

impl StepSize {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", format!("must be positive and finite, got {gamma}")));
        }
        Ok(Self(gamma))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Exponent `1 - exp(-gamma)` of the Fisher-Rao step over one time step.
    pub fn fr_exponent(self) -> f64 {
        -(-self.0).exp_m1()
    }
}

/// N weighted particles in R^d.
///
/// Positions are stored row-major (particle `i` occupies `positions[i*d..(i+1)*d]`).
/// Log-weights are unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    positions: Vec<f64>,
    log_weights: Vec<f64>,
    dim: usize,
    pub iteration: usize,
}

impl ParticleSystem {
    /// Uniformly weighted system from row-major positions.
    pub fn from_positions(positions: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if positions.is_empty() {
            return Err(Error::Empty("particle positions"));
        }
        if positions.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: positions.len() % dim,
            });
        }
        if let Some(k) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: k / dim,
                iteration: 0,
            });
        }
        let n = positions.len() / dim;
        Ok(Self {
            positions,
            log_weights: vec![0.0; n],
            dim,
            iteration: 0,
        })
    }

    pub fn with_log_weights(mut self, log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: log_weights.len(),
            });
        }
        self.log_weights = log_weights;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_weights_mut(&mut self) -> &mut [f64] {
        &mut self.log_weights
    }

    pub fn set_uniform_weights(&mut self) {
        self.log_weights.iter_mut().for_each(|w| *w = 0.0);
    }

    /// True when all log-weights are equal.
    pub fn has_uniform_weights(&self) -> bool {
        let first = self.log_weights[0];
        self.log_weights.iter().all(|w| *w == first)
    }

    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        Ok(normalize_log_weights(&self.log_weights)?.0)
    }

    pub fn ess(&self) -> Result<f64> {
        Ok(effective_sample_size(&self.normalized_weights()?))
    }

    /// Weighted mean and (biased, weights summing to one) covariance, row-major `d x d`.
    pub fn weighted_moments(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let w = self.normalized_weights()?;
        Ok(weighted_moments(&self.positions, &w, self.dim))
    }
}

pub(crate) fn weighted_moments(positions: &[f64], w: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; d];
    for (x, wi) in positions.chunks_exact(d).zip(w) {
        for k in 0..d {
            mean[k] += wi * x[k];
        }
    }
    let mut cov = vec![0.0; d * d];
    for (x, wi) in positions.chunks_exact(d).zip(w) {
        for a in 0..d {
            let da = x[a] - mean[a];
            for b in 0..d {
                cov[a * d + b] += wi * da * (x[b] - mean[b]);
            }
        }
    }
    (mean, cov)
}
