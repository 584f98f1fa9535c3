//! Fisher-Rao reweighting.
//!
//! The denominator of the WFR weight is the Gaussian mixture
//! `sum_j W_j N(x; drift_j, 2 gamma I)` obtained by pushing the previous cloud
//! through the Langevin drift and convolving with the Langevin noise. It is an
//! O(N) log-sum-exp per evaluation point, evaluated densely.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::schedule::FrExponent;
use crate::targets::Target;

/// Evaluation points per rayon task. Each point reduces sequentially, so the
/// result does not depend on the thread count.
const CHUNK: usize = 64;

/// `log sum_j exp(lw_j) N(x; c_j, var I)` where `lw` is `None` for the uniform mixture.
pub(crate) fn log_mixture_density(
    x: &[f64],
    centers: &[f64],
    log_center_weights: Option<&[f64]>,
    var: f64,
    scratch: &mut Vec<f64>,
) -> f64 {
    let d = x.len();
    let n = centers.len() / d;
    scratch.clear();
    let inv = -0.5 / var;
    let mut best = f64::NEG_INFINITY;
    for (j, c) in centers.chunks_exact(d).enumerate() {
        let mut sq = 0.0;
        for k in 0..d {
            let diff = x[k] - c[k];
            sq += diff * diff;
        }
        let mut e = inv * sq;
        if let Some(lw) = log_center_weights {
            e += lw[j];
        }
        if e > best {
            best = e;
        }
        scratch.push(e);
    }
    let log_norm = -0.5 * d as f64 * (2.0 * PI * var).ln();
    if best == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for e in scratch.iter() {
        sum += (e - best).exp();
    }
    let lse = best + sum.ln();
    match log_center_weights {
        Some(_) => lse + log_norm,
        None => lse - (n as f64).ln() + log_norm,
    }
}

fn validate(x_dim: usize, drift_points: &[f64], target: &dyn Target, gamma: f64) -> Result<()> {
    if drift_points.is_empty() {
        return Err(Error::Empty("drift points"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    if x_dim != target.dim() || drift_points.len() % target.dim() != 0 {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: x_dim,
        });
    }
    Ok(())
}

/// `(1 - e^{-gamma}) [log pi(x) - log(N^{-1} sum_i N(x; drift_i, 2 gamma I))]`.
pub fn wfr_log_weight(x: &[f64], drift_points: &[f64], target: &dyn Target, gamma: f64) -> Result<f64> {
    validate(x.len(), drift_points, target, gamma)?;
    let delta = FrExponent::standard(gamma).get();
    Ok(weight_at(x, drift_points, None, target, gamma, delta, &mut Vec::new()))
}

/// Same as [`wfr_log_weight`] with a schedule-dependent exponent `delta_n`.
pub fn tempered_wfr_log_weight(
    x: &[f64],
    drift_points: &[f64],
    target: &dyn Target,
    gamma: f64,
    delta: FrExponent,
) -> Result<f64> {
    validate(x.len(), drift_points, target, gamma)?;
    let max = FrExponent::standard(gamma).get();
    if delta.get() > max * (1.0 + 1e-12) {
        return Err(invalid(
            "delta",
            format!("must not exceed 1 - exp(-gamma) = {max}, got {}", delta.get()),
        ));
    }
    Ok(weight_at(x, drift_points, None, target, gamma, delta.get(), &mut Vec::new()))
}

fn weight_at(
    x: &[f64],
    drift: &[f64],
    log_drift_weights: Option<&[f64]>,
    target: &dyn Target,
    gamma: f64,
    delta: f64,
    scratch: &mut Vec<f64>,
) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    let denom = log_mixture_density(x, drift, log_drift_weights, 2.0 * gamma, scratch);
    delta * (target.log_density(x) - denom)
}

/// Incremental log-weights for every particle position.
///
/// `log_drift_weights` holds normalized log-weights of the mixture components
/// when the previous cloud was not resampled; `None` means uniform.
pub fn fr_log_weights(
    positions: &[f64],
    drift_points: &[f64],
    log_drift_weights: Option<&[f64]>,
    target: &dyn Target,
    gamma: f64,
    delta: f64,
) -> Vec<f64> {
    let d = target.dim();
    let n = positions.len() / d;
    let mut out = vec![0.0; n];
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each_init(Vec::new, |scratch, (c, block)| {
            for (k, w) in block.iter_mut().enumerate() {
                let i = c * CHUNK + k;
                let x = &positions[i * d..(i + 1) * d];
                *w = weight_at(x, drift_points, log_drift_weights, target, gamma, delta, scratch);
            }
        });
    out
}

/// Tempering increments `(lambda_n - lambda_{n-1}) (log pi - log mu0)` at every position.
pub fn tempering_log_weights(
    positions: &[f64],
    mu0: &dyn Target,
    pi: &dyn Target,
    lambda_increment: f64,
) -> Vec<f64> {
    let d = pi.dim();
    if lambda_increment == 0.0 {
        return vec![0.0; positions.len() / d];
    }
    positions
        .chunks_exact(d)
        .map(|x| lambda_increment * (pi.log_density(x) - mu0.log_density(x)))
        .collect()
}
