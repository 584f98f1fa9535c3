//! Discrepancies between a weighted particle cloud and a target: Gaussian
//! kernel MMD, marginal Wasserstein-1 and moment errors.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::particles::{weighted_moments, ParticleSystem};

const CHUNK: usize = 64;

/// One row of the per-iteration metric CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub iteration: usize,
    pub wallclock_s: f64,
    pub ess_fraction: f64,
    pub mmd: f64,
    pub w1_marginal_avg: f64,
    pub mse_mean: f64,
    pub mse_cov: f64,
}

impl MetricReport {
    pub const COLUMNS: [&'static str; 7] = [
        "iteration",
        "wallclock_s",
        "ess_fraction",
        "mmd",
        "w1_marginal_avg",
        "mse_mean",
        "mse_cov",
    ];
}

/// Whether the reported MMD is the squared V-statistic or its square root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MmdForm {
    #[default]
    Squared,
    Root,
}

impl fmt::Display for MmdForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MmdForm::Squared => "squared",
            MmdForm::Root => "root",
        })
    }
}

impl FromStr for MmdForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "squared" => Ok(MmdForm::Squared),
            "root" => Ok(MmdForm::Root),
            other => Err(format!("unknown mmd form `{other}` (expected squared or root)")),
        }
    }
}

#[inline]
fn kernel(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        let d = a[k] - b[k];
        s += d * d;
    }
    (-0.5 * s).exp()
}

fn check_cloud(positions: &[f64], probabilities: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 || positions.is_empty() || probabilities.is_empty() {
        return Err(Error::Empty("particle cloud"));
    }
    let n = positions.len() / dim;
    if positions.len() % dim != 0 || n != probabilities.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: probabilities.len(),
        });
    }
    Ok(n)
}

/// `sum_i w_i sum_j v_j k(x_i, y_j)` reduced in a fixed order.
fn cross_term(xs: &[f64], wx: &[f64], ys: &[f64], wy: Option<&[f64]>, dim: usize) -> f64 {
    let n = wx.len();
    let partial: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = 0.0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                if wx[i] == 0.0 {
                    continue;
                }
                let xi = &xs[i * dim..(i + 1) * dim];
                let row: f64 = match wy {
                    Some(wy) => ys.chunks_exact(dim).zip(wy).map(|(y, v)| v * kernel(xi, y)).sum(),
                    None => ys.chunks_exact(dim).map(|y| kernel(xi, y)).sum(),
                };
                acc += wx[i] * row;
            }
            acc
        })
        .collect();
    partial.iter().sum()
}

/// Fixed reference sample with its precomputed self-interaction term.
#[derive(Debug, Clone)]
pub struct MmdReference {
    points: Vec<f64>,
    dim: usize,
    self_term: f64,
}

impl MmdReference {
    pub fn new(points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || points.is_empty() {
            return Err(Error::Empty("reference sample"));
        }
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.len() % dim,
            });
        }
        let m = points.len() / dim;
        let ones = vec![1.0; m];
        let self_term = cross_term(&points, &ones, &points, None, dim) / (m * m) as f64;
        Ok(Self { points, dim, self_term })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared MMD of a weighted cloud against this reference, clipped at 0.
    pub fn mmd_squared(&self, positions: &[f64], probabilities: &[f64]) -> Result<f64> {
        check_cloud(positions, probabilities, self.dim)?;
        let m = self.len() as f64;
        let xx = cross_term(positions, probabilities, positions, Some(probabilities), self.dim);
        let xy = cross_term(positions, probabilities, &self.points, None, self.dim) / m;
        Ok((xx - 2.0 * xy + self.self_term).max(0.0))
    }

    pub fn mmd(&self, positions: &[f64], probabilities: &[f64]) -> Result<f64> {
        Ok(self.mmd_squared(positions, probabilities)?.sqrt())
    }
}

/// Weighted V-statistic MMD with the unit-bandwidth Gaussian kernel (square root form).
pub fn mmd_gaussian(positions: &[f64], probabilities: &[f64], reference: &[f64], dim: usize) -> Result<f64> {
    MmdReference::new(reference.to_vec(), dim)?.mmd(positions, probabilities)
}

/// Squared form of [`mmd_gaussian`].
pub fn mmd_squared(positions: &[f64], probabilities: &[f64], reference: &[f64], dim: usize) -> Result<f64> {
    MmdReference::new(reference.to_vec(), dim)?.mmd_squared(positions, probabilities)
}

fn sorted_marginal(positions: &[f64], weights: Option<&[f64]>, dim: usize, axis: usize) -> Vec<(f64, f64)> {
    let n = positions.len() / dim;
    let w0 = 1.0 / n as f64;
    let mut v: Vec<(f64, f64)> = (0..n)
        .map(|i| (positions[i * dim + axis], weights.map_or(w0, |w| w[i])))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Exact W1 between two sorted weighted atom lists by merged quantile inversion.
fn w1_sorted(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    loop {
        let dw = ra.min(rb);
        total += dw * (a[i].0 - b[j].0).abs();
        ra -= dw;
        rb -= dw;
        let a_done = ra <= 0.0;
        let b_done = rb <= 0.0;
        if a_done {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i].1;
        }
        if b_done {
            j += 1;
            if j == b.len() {
                break;
            }
            rb = b[j].1;
        }
    }
    total
}

/// W1 between coordinate `axis` of a weighted cloud and of a uniformly weighted reference.
pub fn w1_marginal(positions: &[f64], probabilities: &[f64], reference: &[f64], dim: usize, axis: usize) -> Result<f64> {
    check_cloud(positions, probabilities, dim)?;
    if reference.is_empty() {
        return Err(Error::Empty("reference sample"));
    }
    if axis >= dim {
        return Err(invalid("axis", format!("must be below the dimension {dim}, got {axis}")));
    }
    let a = sorted_marginal(positions, Some(probabilities), dim, axis);
    let b = sorted_marginal(reference, None, dim, axis);
    Ok(w1_sorted(&a, &b))
}

/// Mean over axes of [`w1_marginal`].
pub fn w1_marginal_avg(positions: &[f64], probabilities: &[f64], reference: &[f64], dim: usize) -> Result<f64> {
    let mut s = 0.0;
    for axis in 0..dim {
        s += w1_marginal(positions, probabilities, reference, dim, axis)?;
    }
    Ok(s / dim as f64)
}

/// `(|mean - m|^2 / d, |cov - C|_F^2 / d^2)` for the weighted cloud.
pub fn moment_mse(
    positions: &[f64],
    probabilities: &[f64],
    dim: usize,
    true_mean: &[f64],
    true_cov: &[f64],
) -> Result<(f64, f64)> {
    let n = check_cloud(positions, probabilities, dim)?;
    if n < 2 {
        return Err(invalid("n_particles", "covariance needs at least 2 particles"));
    }
    if true_mean.len() != dim || true_cov.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: true_mean.len(),
        });
    }
    let (m, c) = weighted_moments(positions, probabilities, dim);
    let mse_mean = m.iter().zip(true_mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / dim as f64;
    let mse_cov = c.iter().zip(true_cov).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (dim * dim) as f64;
    Ok((mse_mean, mse_cov))
}

/// Computes [`MetricReport`]s against a fixed reference sample and known moments.
#[derive(Debug, Clone)]
pub struct Evaluator {
    reference: MmdReference,
    true_mean: Vec<f64>,
    true_cov: Vec<f64>,
    form: MmdForm,
}

impl Evaluator {
    pub fn new(reference: MmdReference, true_mean: Vec<f64>, true_cov: Vec<f64>, form: MmdForm) -> Result<Self> {
        let d = reference.dim();
        if true_mean.len() != d || true_cov.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: true_mean.len(),
            });
        }
        Ok(Self {
            reference,
            true_mean,
            true_cov,
            form,
        })
    }

    pub fn reference(&self) -> &MmdReference {
        &self.reference
    }

    pub fn form(&self) -> MmdForm {
        self.form
    }

    pub fn mmd(&self, ps: &ParticleSystem) -> Result<f64> {
        let w = ps.normalized_weights()?;
        match self.form {
            MmdForm::Squared => self.reference.mmd_squared(ps.positions(), &w),
            MmdForm::Root => self.reference.mmd(ps.positions(), &w),
        }
    }

    pub fn report(&self, ps: &ParticleSystem, wallclock_s: f64) -> Result<MetricReport> {
        let w = ps.normalized_weights()?;
        let d = ps.dim();
        let ess = crate::weights::effective_sample_size(&w) / ps.len() as f64;
        let mmd = match self.form {
            MmdForm::Squared => self.reference.mmd_squared(ps.positions(), &w)?,
            MmdForm::Root => self.reference.mmd(ps.positions(), &w)?,
        };
        let w1 = w1_marginal_avg(ps.positions(), &w, self.reference.points(), d)?;
        let (mse_mean, mse_cov) = moment_mse(ps.positions(), &w, d, &self.true_mean, &self.true_cov)?;
        Ok(MetricReport {
            iteration: ps.iteration,
            wallclock_s,
            ess_fraction: ess.min(1.0),
            mmd,
            w1_marginal_avg: w1,
            mse_mean,
            mse_cov,
        })
    }
}
