//! Log-domain weight arithmetic.
//!
//! Weights are stored unnormalized in log space. Normalization uses a
//! max-shifted log-sum-exp with left-to-right summation so that results are
//! reproducible bit for bit.

use crate::error::{Error, Result};

/// `log(sum(exp(values)))` with a max shift. Returns `-inf` when every entry is `-inf`
/// (or when `values` is empty).
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    for &v in values {
        sum += (v - max).exp();
    }
    max + sum.ln()
}

/// Normalizes unnormalized log-weights into probabilities.
///
/// Returns the probability vector together with `logsumexp(lw)`.
pub fn normalize_log_weights(lw: &[f64]) -> Result<(Vec<f64>, f64)> {
    if lw.is_empty() {
        return Err(Error::Empty("log-weights"));
    }
    if lw.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::InvalidParameter {
            name: "log_weights",
            reason: "entries must be finite or -inf".into(),
        });
    }
    let log_norm = logsumexp(lw);
    if log_norm == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    let probs = lw.iter().map(|v| (v - log_norm).exp()).collect();
    Ok((probs, log_norm))
}

/// Effective sample size `1 / sum(p_i^2)` of a probability vector.
pub fn effective_sample_size(probabilities: &[f64]) -> f64 {
    let sum_sq: f64 = probabilities.iter().map(|p| p * p).sum();
    1.0 / sum_sq
}
