//! Target and initial distributions.
//!
//! Log-densities are only defined up to an additive constant. A standalone
//! Gaussian uses `-(x-m)' C^{-1} (x-m) / 2` so its peak value is zero; mixture
//! components keep their relative normalizers.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::weights::logsumexp;

/// An unnormalized density on R^d with its score.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    /// `log pi(x)` up to an additive constant. `x.len()` must equal `dim()`.
    fn log_density(&self, x: &[f64]) -> f64;

    /// Writes `grad log pi(x)` into `out`.
    fn grad_log_density(&self, x: &[f64], out: &mut [f64]);

    /// Draws `n` exact samples, returned row-major `n x d`.
    fn sample_exact(&self, _n: usize, _rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        Err(Error::UnsupportedTarget(
            "no exact sampler for this target".into(),
        ))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Dimension-checked `log pi(x)`.
pub fn log_density_unnorm(target: &dyn Target, x: &[f64]) -> Result<f64> {
    check_dim(target.dim(), x.len())?;
    Ok(target.log_density(x))
}

/// Dimension-checked `grad log pi(x)`.
pub fn grad_log_density(target: &dyn Target, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(target.dim(), x.len())?;
    let mut g = vec![0.0; x.len()];
    target.grad_log_density(x, &mut g);
    Ok(g)
}

/// Draws `n` exact samples (row-major) from a Gaussian or Gaussian mixture.
pub fn sample_exact(target: &dyn Target, n: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
    target.sample_exact(n, rng)
}

/// Gaussian `N(m, C)` with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    mean: Vec<f64>,
    cov: Vec<f64>,
    chol: Vec<f64>,
    precision: Vec<f64>,
    log_det: f64,
}

impl GaussianTarget {
    /// `cov` is row-major `d x d`.
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Empty("gaussian mean"));
        }
        if cov.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: cov.len(),
            });
        }
        let m = DMatrix::from_row_slice(d, d, &cov);
        if (&m - m.transpose()).abs().max() > 1e-12 * (1.0 + m.abs().max()) {
            return Err(Error::NotSpd("covariance is not symmetric".into()));
        }
        let chol = m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let prec = chol.inverse();
        Ok(Self {
            mean,
            cov,
            chol: l.transpose().as_slice().to_vec(),
            precision: prec.transpose().as_slice().to_vec(),
            log_det,
        })
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(invalid("variance", format!("must be positive, got {variance}")));
        }
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = variance;
        }
        Self::new(mean, cov)
    }

    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        Self::isotropic(vec![mean], variance)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    pub fn precision(&self) -> &[f64] {
        &self.precision
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Squared Mahalanobis distance via forward substitution with the Cholesky factor.
    fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        if d == 1 {
            let z = (x[0] - self.mean[0]) / self.chol[0];
            return z * z;
        }
        let mut z = [0.0f64; 8];
        let mut zv;
        let z: &mut [f64] = if d <= 8 {
            &mut z[..d]
        } else {
            zv = vec![0.0; d];
            &mut zv
        };
        let mut q = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for j in 0..i {
                s -= self.chol[i * d + j] * z[j];
            }
            z[i] = s / self.chol[i * d + i];
            q += z[i] * z[i];
        }
        q
    }

    fn normalized_log_density(&self, x: &[f64]) -> f64 {
        -0.5 * (self.mahalanobis_sq(x) + self.log_det)
    }

    fn sample_into(&self, rng: &mut dyn rand::RngCore, out: &mut [f64]) {
        let d = self.mean.len();
        let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..d {
            let mut v = self.mean[i];
            for j in 0..=i {
                v += self.chol[i * d + j] * xi[j];
            }
            out[i] = v;
        }
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        -0.5 * self.mahalanobis_sq(x)
    }

    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
        let d = self.mean.len();
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s -= self.precision[i * d + j] * (x[j] - self.mean[j]);
            }
            out[i] = s;
        }
    }

    fn sample_exact(&self, n: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        let d = self.mean.len();
        let mut out = vec![0.0; n * d];
        for row in out.chunks_exact_mut(d) {
            self.sample_into(rng, row);
        }
        Ok(out)
    }
}

/// Finite mixture of Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureTarget {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    components: Vec<GaussianTarget>,
}

impl GaussianMixtureTarget {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianTarget>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("mixture components"));
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        let d = components[0].dim();
        for c in &components {
            check_dim(d, c.dim())?;
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights", "must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("must sum to 1, got {total}")));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            weights,
            log_weights,
            components,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianTarget] {
        &self.components
    }

    /// Mixture mean and covariance `sum w_k (C_k + m_k m_k') - m m'`.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut mean = vec![0.0; d];
        for (w, c) in self.weights.iter().zip(&self.components) {
            for i in 0..d {
                mean[i] += w * c.mean[i];
            }
        }
        let mut cov = vec![0.0; d * d];
        for (w, c) in self.weights.iter().zip(&self.components) {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += w * (c.cov[i * d + j] + c.mean[i] * c.mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] -= mean[i] * mean[j];
            }
        }
        (mean, cov)
    }

    /// Component index of each exact draw is returned alongside the samples.
    pub fn sample_with_labels(
        &self,
        n: usize,
        rng: &mut dyn rand::RngCore,
    ) -> Result<(Vec<f64>, Vec<usize>)> {
        let d = self.dim();
        let picker = WeightedIndex::new(&self.weights)
            .map_err(|e| invalid("weights", e.to_string()))?;
        let mut out = vec![0.0; n * d];
        let mut labels = Vec::with_capacity(n);
        for row in out.chunks_exact_mut(d) {
            let k = picker.sample(rng);
            self.components[k].sample_into(rng, row);
            labels.push(k);
        }
        Ok((out, labels))
    }
}

impl Target for GaussianMixtureTarget {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let mut terms = [0.0f64; 16];
        let mut tv;
        let k = self.components.len();
        let terms: &mut [f64] = if k <= 16 {
            &mut terms[..k]
        } else {
            tv = vec![0.0; k];
            &mut tv
        };
        for (t, (lw, c)) in terms
            .iter_mut()
            .zip(self.log_weights.iter().zip(&self.components))
        {
            *t = lw + c.normalized_log_density(x);
        }
        logsumexp(terms)
    }

    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let terms: Vec<f64> = self
            .log_weights
            .iter()
            .zip(&self.components)
            .map(|(lw, c)| lw + c.normalized_log_density(x))
            .collect();
        let norm = logsumexp(&terms);
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut g = vec![0.0; d];
        for (t, c) in terms.iter().zip(&self.components) {
            let r = (t - norm).exp();
            if r == 0.0 {
                continue;
            }
            c.grad_log_density(x, &mut g);
            for i in 0..d {
                out[i] += r * g[i];
            }
        }
    }

    fn sample_exact(&self, n: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        Ok(self.sample_with_labels(n, rng)?.0)
    }
}

/// Geometric interpolation `pi_lambda ∝ tip^lambda * base^(1 - lambda)`.
pub struct GeometricPathTarget<'a> {
    base: &'a dyn Target,
    tip: &'a dyn Target,
    lambda: f64,
}

impl<'a> GeometricPathTarget<'a> {
    pub fn new(base: &'a dyn Target, tip: &'a dyn Target, lambda: f64) -> Result<Self> {
        check_dim(base.dim(), tip.dim())?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid("lambda", format!("must lie in [0, 1], got {lambda}")));
        }
        Ok(Self { base, tip, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Target for GeometricPathTarget<'_> {
    fn dim(&self) -> usize {
        self.tip.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (1.0 - self.lambda) * self.base.log_density(x) + self.lambda * self.tip.log_density(x)
    }

    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
        tempered_grad(self.base, self.tip, self.lambda, x, out);
    }

    fn sample_exact(&self, n: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        if self.lambda == 0.0 {
            self.base.sample_exact(n, rng)
        } else if self.lambda == 1.0 {
            self.tip.sample_exact(n, rng)
        } else {
            Err(Error::UnsupportedTarget(format!(
                "geometric path at lambda = {} has no exact sampler",
                self.lambda
            )))
        }
    }
}

/// `(1 - lambda) grad log base + lambda grad log tip`.
///
/// At `lambda == 1` only the tip gradient is evaluated, so the result is
/// bit-identical to `tip.grad_log_density`.
pub(crate) fn tempered_grad(base: &dyn Target, tip: &dyn Target, lambda: f64, x: &[f64], out: &mut [f64]) {
    if lambda == 1.0 {
        tip.grad_log_density(x, out);
        return;
    }
    if lambda == 0.0 {
        base.grad_log_density(x, out);
        return;
    }
    let d = x.len();
    let mut gb = [0.0f64; 8];
    let mut gbv;
    let gb: &mut [f64] = if d <= 8 {
        &mut gb[..d]
    } else {
        gbv = vec![0.0; d];
        &mut gbv
    };
    base.grad_log_density(x, gb);
    tip.grad_log_density(x, out);
    for i in 0..d {
        out[i] = (1.0 - lambda) * gb[i] + lambda * out[i];
    }
}

/// A concrete target built from a preset.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetModel {
    Gaussian(GaussianTarget),
    Mixture(GaussianMixtureTarget),
}

impl TargetModel {
    /// True mean and covariance (row-major).
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            TargetModel::Gaussian(g) => (g.mean().to_vec(), g.cov().to_vec()),
            TargetModel::Mixture(m) => m.moments(),
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianTarget> {
        match self {
            TargetModel::Gaussian(g) => Some(g),
            TargetModel::Mixture(_) => None,
        }
    }
}

impl Target for TargetModel {
    fn dim(&self) -> usize {
        match self {
            TargetModel::Gaussian(g) => g.dim(),
            TargetModel::Mixture(m) => m.dim(),
        }
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            TargetModel::Gaussian(g) => g.log_density(x),
            TargetModel::Mixture(m) => m.log_density(x),
        }
    }

    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
        match self {
            TargetModel::Gaussian(g) => g.grad_log_density(x, out),
            TargetModel::Mixture(m) => m.grad_log_density(x, out),
        }
    }

    fn sample_exact(&self, n: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        match self {
            TargetModel::Gaussian(g) => g.sample_exact(n, rng),
            TargetModel::Mixture(m) => m.sample_exact(n, rng),
        }
    }
}

/// Named distributions addressable from configuration files.
///
/// | syntax | distribution |
/// |---|---|
/// | `gauss1d(m, c)` | `N(m, c)` on R, `c` is the variance |
/// | `iso_gauss(c, m1, ..., md)` | `N((m1..md), c I)` |
/// | `bimodal(m)` | `N(0,1)/2 + N(m,1)/2` |
/// | `four_mode` | the 2D four-component mixture |
/// | `four_mode_init` | `N((0, 8), 0.3 I)`, the initial law paired with `four_mode` |
#[derive(Debug, Clone, PartialEq)]
pub enum TargetPreset {
    Gauss1d { mean: f64, variance: f64 },
    IsoGauss { variance: f64, mean: Vec<f64> },
    Bimodal { separation: f64 },
    FourMode,
    FourModeInit,
}

impl TargetPreset {
    pub fn build(&self) -> Result<TargetModel> {
        Ok(match self {
            TargetPreset::Gauss1d { mean, variance } => {
                TargetModel::Gaussian(GaussianTarget::univariate(*mean, *variance)?)
            }
            TargetPreset::IsoGauss { variance, mean } => {
                TargetModel::Gaussian(GaussianTarget::isotropic(mean.clone(), *variance)?)
            }
            TargetPreset::Bimodal { separation } => TargetModel::Mixture(bimodal(*separation)?),
            TargetPreset::FourMode => TargetModel::Mixture(four_mode()?),
            TargetPreset::FourModeInit => {
                TargetModel::Gaussian(GaussianTarget::isotropic(vec![0.0, 8.0], 0.3)?)
            }
        })
    }
}

impl fmt::Display for TargetPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetPreset::Gauss1d { mean, variance } => write!(f, "gauss1d({mean},{variance})"),
            TargetPreset::IsoGauss { variance, mean } => {
                write!(f, "iso_gauss({variance}")?;
                for m in mean {
                    write!(f, ",{m}")?;
                }
                write!(f, ")")
            }
            TargetPreset::Bimodal { separation } => write!(f, "bimodal({separation})"),
            TargetPreset::FourMode => write!(f, "four_mode"),
            TargetPreset::FourModeInit => write!(f, "four_mode_init"),
        }
    }
}

/// Splits `name(a, b, ...)` into the name and its numeric arguments.
pub(crate) fn parse_call(text: &str) -> std::result::Result<(String, Vec<f64>), String> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        return Ok((text.to_string(), Vec::new()));
    };
    if !text.ends_with(')') {
        return Err(format!("missing closing parenthesis in `{text}`"));
    }
    let name = text[..open].trim().to_string();
    let inner = &text[open + 1..text.len() - 1];
    if inner.trim().is_empty() {
        return Ok((name, Vec::new()));
    }
    let args = inner
        .split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| format!("argument `{}` of `{name}` is not a number", a.trim()))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((name, args))
}

impl FromStr for TargetPreset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (name, args) = parse_call(s)?;
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("`{name}` takes {n} argument(s), got {}", args.len()))
            }
        };
        match name.as_str() {
            "gauss1d" => {
                arity(2)?;
                if args[1] <= 0.0 {
                    return Err(format!("gauss1d variance must be positive, got {}", args[1]));
                }
                Ok(TargetPreset::Gauss1d {
                    mean: args[0],
                    variance: args[1],
                })
            }
            "iso_gauss" => {
                if args.len() < 2 {
                    return Err("`iso_gauss` takes a variance followed by at least one mean coordinate".into());
                }
                if args[0] <= 0.0 {
                    return Err(format!("iso_gauss variance must be positive, got {}", args[0]));
                }
                Ok(TargetPreset::IsoGauss {
                    variance: args[0],
                    mean: args[1..].to_vec(),
                })
            }
            "bimodal" => {
                arity(1)?;
                Ok(TargetPreset::Bimodal {
                    separation: args[0],
                })
            }
            "four_mode" => {
                arity(0)?;
                Ok(TargetPreset::FourMode)
            }
            "four_mode_init" => {
                arity(0)?;
                Ok(TargetPreset::FourModeInit)
            }
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

/// `N(0,1)/2 + N(m,1)/2` on R.
pub fn bimodal(separation: f64) -> Result<GaussianMixtureTarget> {
    GaussianMixtureTarget::new(
        vec![0.5, 0.5],
        vec![
            GaussianTarget::univariate(0.0, 1.0)?,
            GaussianTarget::univariate(separation, 1.0)?,
        ],
    )
}

/// Four well separated anisotropic modes in R^2, equal weights.
pub fn four_mode() -> Result<GaussianMixtureTarget> {
    let horizontal = vec![1.2, 0.0, 0.0, 0.01];
    let vertical = vec![0.01, 0.0, 0.0, 2.0];
    GaussianMixtureTarget::new(
        vec![0.25; 4],
        vec![
            GaussianTarget::new(vec![0.0, 8.0], horizontal.clone())?,
            GaussianTarget::new(vec![0.0, 2.0], horizontal)?,
            GaussianTarget::new(vec![-3.0, 5.0], vertical.clone())?,
            GaussianTarget::new(vec![3.0, 5.0], vertical)?,
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    fn fd_check(t: &dyn Target, x: &[f64]) {
        let h = 1e-5;
        let g = grad_log_density(t, x).unwrap();
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + h;
            let fp = t.log_density(&xp);
            xp[i] = x[i] - h;
            let fm = t.log_density(&xp);
            xp[i] = x[i];
            let fd = (fp - fm) / (2.0 * h);
            let scale = g[i].abs().max(1.0);
            assert!(
                (fd - g[i]).abs() <= 1e-5 * scale,
                "coordinate {i} at {x:?}: fd {fd} vs grad {}",
                g[i]
            );
        }
    }

    #[test]
    fn standard_gaussian_conventions() {
        let g = GaussianTarget::univariate(0.0, 1.0).unwrap();
        assert_eq!(log_density_unnorm(&g, &[0.0]).unwrap(), 0.0);
        assert_eq!(grad_log_density(&g, &[1.0]).unwrap(), vec![-1.0]);
        assert!(log_density_unnorm(&g, &[0.0, 1.0]).is_err());
        assert!(grad_log_density(&g, &[]).is_err());
    }

    #[test]
    fn gradient_vanishes_at_mode() {
        let g = GaussianTarget::new(vec![1.0, -2.0], vec![2.0, 0.3, 0.3, 0.5]).unwrap();
        let grad = grad_log_density(&g, &[1.0, -2.0]).unwrap();
        assert!(grad.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn non_spd_rejected() {
        assert!(GaussianTarget::new(vec![0.0, 0.0], vec![1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(GaussianTarget::new(vec![0.0, 0.0], vec![1.0, 0.1, 0.0, 1.0]).is_err());
        assert!(GaussianTarget::univariate(0.0, -1.0).is_err());
    }

    #[test]
    fn equal_mixture_reflection_symmetry() {
        let m = 3.7;
        let mix = bimodal(m).unwrap();
        for x in [-2.0, 0.3, m / 2.0, 5.0] {
            let a = mix.log_density(&[x]);
            let b = mix.log_density(&[m - x]);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn geometric_midpoint_is_average() {
        let mu0 = GaussianTarget::univariate(0.0, 1.0).unwrap();
        let pi = GaussianTarget::univariate(2.0, 1.0).unwrap();
        let path = GeometricPathTarget::new(&mu0, &pi, 0.5).unwrap();
        for x in [-1.0, 0.0, 0.7, 3.0] {
            let expect = 0.5 * (mu0.log_density(&[x]) + pi.log_density(&[x]));
            assert!((path.log_density(&[x]) - expect).abs() < 1e-14);
            let g = grad_log_density(&path, &[x]).unwrap()[0];
            let ge = 0.5 * (-x) + 0.5 * (2.0 - x);
            assert!((g - ge).abs() < 1e-14);
        }
        assert!(GeometricPathTarget::new(&mu0, &pi, 1.5).is_err());
    }

    #[test]
    fn geometric_endpoint_matches_tip_differences() {
        let mu0 = GaussianTarget::univariate(0.0, 1.0).unwrap();
        let pi = bimodal(4.0).unwrap();
        let path = GeometricPathTarget::new(&mu0, &pi, 1.0).unwrap();
        let (a, b) = ([0.3], [2.9]);
        assert_eq!(
            path.log_density(&a) - path.log_density(&b),
            pi.log_density(&a) - pi.log_density(&b)
        );
        let mut rng = RngStream::new(1, 0).rng();
        assert!(path.sample_exact(4, &mut rng).is_ok());
        let mid = GeometricPathTarget::new(&mu0, &pi, 0.4).unwrap();
        assert!(matches!(
            sample_exact(&mid, 4, &mut rng),
            Err(Error::UnsupportedTarget(_))
        ));
    }

    #[test]
    fn finite_difference_consistency() {
        let mut rng = RngStream::new(11, 0).rng();
        let mu0 = GaussianTarget::isotropic(vec![0.0, 8.0], 0.3).unwrap();
        let fm = four_mode().unwrap();
        let corr = GaussianTarget::new(vec![0.5, -1.0], vec![1.5, 0.4, 0.4, 0.8]).unwrap();
        let path = GeometricPathTarget::new(&mu0, &fm, 0.3).unwrap();
        let targets: Vec<&dyn Target> = vec![&mu0, &fm, &corr, &path];
        for t in targets {
            for _ in 0..100 {
                let x = [rng.random_range(-4.0..4.0), rng.random_range(1.0..9.0)];
                fd_check(t, &x);
            }
        }
        let bi = bimodal(5.0).unwrap();
        for _ in 0..100 {
            fd_check(&bi, &[rng.random_range(-3.0..8.0)]);
        }
    }

    #[test]
    fn mixture_logsumexp_matches_direct_sum() {
        let mix = bimodal(2.0).unwrap();
        for x in [-1.5, 0.0, 1.0, 2.5, 4.0] {
            let direct: f64 = mix
                .weights()
                .iter()
                .zip(mix.components())
                .map(|(w, c)| w * c.normalized_log_density(&[x]).exp())
                .sum();
            assert!((mix.log_density(&[x]) - direct.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn standard_normal_sample_mean() {
        let g = GaussianTarget::univariate(0.0, 1.0).unwrap();
        let mut rng = RngStream::new(3, 0).rng();
        let s = g.sample_exact(100_000, &mut rng).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        // 3 / sqrt(n) = 0.0095 < 0.02
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn degenerate_mixture_draws_first_component() {
        let mix = GaussianMixtureTarget::new(
            vec![1.0, 0.0],
            vec![
                GaussianTarget::univariate(-50.0, 1.0).unwrap(),
                GaussianTarget::univariate(50.0, 1.0).unwrap(),
            ],
        )
        .unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        let (s, labels) = mix.sample_with_labels(1000, &mut rng).unwrap();
        assert!(labels.iter().all(|&k| k == 0));
        assert!(s.iter().all(|v| *v < 0.0));
    }

    #[test]
    fn four_mode_occupancy() {
        let fm = four_mode().unwrap();
        let mut rng = RngStream::new(9, 0).rng();
        let n = 100_000;
        let (_, labels) = fm.sample_with_labels(n, &mut rng).unwrap();
        // multinomial CLT: sd = sqrt(p(1-p)/n) = 0.00137, 0.01 is > 7 sd
        for k in 0..4 {
            let frac = labels.iter().filter(|&&l| l == k).count() as f64 / n as f64;
            assert!((frac - 0.25).abs() < 0.01, "component {k}: {frac}");
        }
    }

    #[test]
    fn four_mode_moments() {
        let (m, c) = four_mode().unwrap().moments();
        assert!((m[0]).abs() < 1e-14 && (m[1] - 5.0).abs() < 1e-14);
        // brute force: sum w_k (C_k + m_k m_k') - m m'
        let means = [(0.0, 8.0), (0.0, 2.0), (-3.0, 5.0), (3.0, 5.0)];
        let covs = [(1.2, 0.01), (1.2, 0.01), (0.01, 2.0), (0.01, 2.0)];
        let mut cxx = 0.0;
        let mut cyy = 0.0;
        for (mk, ck) in means.iter().zip(&covs) {
            cxx += 0.25 * (ck.0 + mk.0 * mk.0);
            cyy += 0.25 * (ck.1 + mk.1 * mk.1);
        }
        cyy -= 25.0;
        assert!((c[0] - cxx).abs() < 1e-12);
        assert!((c[3] - cyy).abs() < 1e-12);
        assert!(c[1].abs() < 1e-12 && c[2].abs() < 1e-12);
    }

    #[test]
    fn preset_parsing() {
        assert_eq!(
            "gauss1d(20, 0.1)".parse::<TargetPreset>().unwrap(),
            TargetPreset::Gauss1d { mean: 20.0, variance: 0.1 }
        );
        assert_eq!(
            "bimodal(6)".parse::<TargetPreset>().unwrap(),
            TargetPreset::Bimodal { separation: 6.0 }
        );
        assert_eq!("four_mode".parse::<TargetPreset>().unwrap(), TargetPreset::FourMode);
        let iso: TargetPreset = "iso_gauss(0.3, 0, 8)".parse().unwrap();
        assert_eq!(iso.to_string(), "iso_gauss(0.3,0,8)");
        assert!("gauss1d(1)".parse::<TargetPreset>().is_err());
        assert!("gauss1d(0,-1)".parse::<TargetPreset>().is_err());
        assert!("banana(1)".parse::<TargetPreset>().is_err());
        assert!("bimodal(x)".parse::<TargetPreset>().is_err());
    }
}
