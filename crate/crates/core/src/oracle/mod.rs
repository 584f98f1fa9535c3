//! Exact Gaussian moment evolution along the W, FR, WFR flows and their
//! tempered and unit-time variants.
//!
//! When both the initial law and the target are Gaussian every flow stays in
//! the Gaussian family, so the law is tracked by its mean and covariance.

mod closed_form;
mod flows;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::targets::GaussianTarget;

pub use closed_form::{closed_form, tempered_w_1d};
pub use flows::{evolve, evolve_rk4, moment_rhs, unit_fr_time_rescaling_check, FlowKind};

/// Mean, covariance (row-major) and time of a Gaussian law.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    pub time: f64,
}

impl GaussianState {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let s = Self { mean, cov, time: 0.0 };
        s.check()?;
        Ok(s)
    }

    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![mean], vec![variance])
    }

    pub fn from_target(g: &GaussianTarget) -> Self {
        Self {
            mean: g.mean().to_vec(),
            cov: g.cov().to_vec(),
            time: 0.0,
        }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Checks shape, finiteness and positive definiteness.
    pub fn check(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Empty("gaussian mean"));
        }
        if self.cov.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: self.cov.len(),
            });
        }
        if self.mean.iter().chain(&self.cov).any(|v| !v.is_finite()) {
            return Err(Error::NotSpd("non-finite moments".into()));
        }
        if self.cov_matrix().cholesky().is_none() {
            return Err(Error::NotSpd(format!("covariance {:?} is not positive definite", self.cov)));
        }
        Ok(())
    }

    pub fn to_target(&self) -> Result<GaussianTarget> {
        GaussianTarget::new(self.mean.clone(), self.cov.clone())
    }

    pub(crate) fn mean_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.mean)
    }

    pub(crate) fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.cov)
    }

    pub(crate) fn from_parts(mean: &DVector<f64>, cov: &DMatrix<f64>, time: f64) -> Self {
        Self {
            mean: mean.as_slice().to_vec(),
            cov: cov.transpose().as_slice().to_vec(),
            time,
        }
    }
}

pub(crate) fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotSpd(format!("{what} is not positive definite")))
}

fn log_det(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let c = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd(format!("{what} is not positive definite")))?;
    Ok(2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// `KL(a || b)` between two Gaussians.
pub fn gaussian_kl(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    a.check()?;
    b.check()?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let d = a.dim() as f64;
    let ca = a.cov_matrix();
    let cb = b.cov_matrix();
    let pb = spd_inverse(&cb, "second covariance")?;
    let diff = b.mean_vector() - a.mean_vector();
    let trace = (&pb * &ca).trace();
    let quad = diff.dot(&(&pb * &diff));
    let kl = 0.5 * (trace + quad - d + log_det(&cb, "second covariance")? - log_det(&ca, "first covariance")?);
    Ok(kl.max(0.0))
}

/// One Fisher-Rao (mirror descent) step between Gaussians:
/// the law proportional to `mu^(1 - delta) pi^delta`.
pub fn mirror_descent_gaussian(mu: &GaussianState, pi: &GaussianState, delta: f64) -> Result<GaussianState> {
    mu.check()?;
    pi.check()?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(invalid("delta", format!("must lie in [0, 1], got {delta}")));
    }
    if mu.dim() != pi.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: pi.dim(),
        });
    }
    if delta == 0.0 {
        return Ok(mu.clone());
    }
    if delta == 1.0 {
        return Ok(pi.clone().at_time(mu.time));
    }
    let p_mu = spd_inverse(&mu.cov_matrix(), "covariance")?;
    let p_pi = spd_inverse(&pi.cov_matrix(), "target covariance")?;
    let prec = &p_mu * (1.0 - delta) + &p_pi * delta;
    let cov = spd_inverse(&prec, "combined precision")?;
    let eta = &p_mu * mu.mean_vector() * (1.0 - delta) + &p_pi * pi.mean_vector() * delta;
    let mean = &cov * eta;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianState::from_parts(&mean, &cov, mu.time))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_examples() {
        let a = GaussianState::univariate(0.0, 1.0).unwrap();
        let b = GaussianState::univariate(20.0, 0.1).unwrap();
        assert_eq!(gaussian_kl(&a, &a).unwrap(), 0.0);
        let expect = 0.5 * (0.1f64.ln() + 401.0 / 0.1 - 1.0);
        let kl = gaussian_kl(&a, &b).unwrap();
        assert!((kl - expect).abs() < 1e-9);
        assert!((kl - 2003.3487).abs() < 1e-4);
        assert!((gaussian_kl(&b, &a).unwrap() - kl).abs() > 1.0);
    }

    #[test]
    fn kl_matches_grid_integration() {
        // KL(a||b) = int a log(a/b) on a fine grid
        let (ma, va, mb, vb) = (0.3, 0.7, -0.4, 1.9);
        let ln_pdf = |x: f64, m: f64, v: f64| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m).powi(2) / (2.0 * v);
        let h = 1e-3;
        let mut s = 0.0;
        let mut x = -15.0;
        while x < 15.0 {
            let la = ln_pdf(x, ma, va);
            s += la.exp() * (la - ln_pdf(x, mb, vb)) * h;
            x += h;
        }
        let kl = gaussian_kl(
            &GaussianState::univariate(ma, va).unwrap(),
            &GaussianState::univariate(mb, vb).unwrap(),
        )
        .unwrap();
        assert!((kl - s).abs() < 1e-6, "{kl} vs {s}");
    }

    #[test]
    fn kl_rejects_non_spd() {
        let a = GaussianState { mean: vec![0.0], cov: vec![-1.0], time: 0.0 };
        let b = GaussianState::univariate(0.0, 1.0).unwrap();
        assert!(gaussian_kl(&a, &b).is_err());
        assert!(GaussianState::new(vec![0.0, 0.0], vec![1.0, 2.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn mirror_descent_examples() {
        let mu = GaussianState::univariate(0.0, 1.0).unwrap();
        let pi = GaussianState::univariate(2.0, 0.5).unwrap();
        assert_eq!(mirror_descent_gaussian(&mu, &pi, 0.0).unwrap(), mu);
        assert_eq!(mirror_descent_gaussian(&mu, &pi, 1.0).unwrap(), pi);
        let half = mirror_descent_gaussian(&mu, &pi, 0.5).unwrap();
        assert!((half.cov[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((half.mean[0] - 4.0 / 3.0).abs() < 1e-14);
        assert!(mirror_descent_gaussian(&mu, &pi, 1.5).is_err());
    }

    #[test]
    fn mirror_descent_composes_to_fr_flow() {
        // n steps of size delta = 1 - e^{-gamma} give the FR law at time n gamma
        let mu0 = GaussianState::new(vec![1.0, -1.0], vec![2.0, 0.3, 0.3, 1.0]).unwrap();
        let pi = GaussianState::new(vec![0.0, 4.0], vec![0.5, -0.1, -0.1, 0.2]).unwrap();
        let g = 0.1;
        let mut s = mu0.clone();
        for _ in 0..20 {
            s = mirror_descent_gaussian(&s, &pi, -(-g as f64).exp_m1()).unwrap();
        }
        let exact = closed_form(FlowKind::FR, &mu0, &pi, None, 2.0).unwrap().unwrap();
        for (a, b) in s.mean.iter().zip(&exact.mean).chain(s.cov.iter().zip(&exact.cov)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
