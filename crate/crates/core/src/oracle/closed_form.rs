use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{spd_inverse, GaussianState};
use crate::error::{invalid, Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::schedule::TemperingSchedule;

use super::FlowKind;

const QUAD_TOL: f64 = 1e-10;

/// Explicit solution of `kind` at time `t`, or `None` when no closed form is
/// implemented for this kind and dimension.
///
/// Available: W and FR in any dimension, unit-time FR on `[0, 1]`, WFR and
/// tempered W in one dimension.
pub fn closed_form(
    kind: FlowKind,
    mu0: &GaussianState,
    pi: &GaussianState,
    schedule: Option<&TemperingSchedule>,
    t: f64,
) -> Result<Option<GaussianState>> {
    mu0.check()?;
    pi.check()?;
    if mu0.dim() != pi.dim() {
        return Err(Error::DimensionMismatch {
            expected: pi.dim(),
            got: mu0.dim(),
        });
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be finite and nonnegative, got {t}")));
    }
    let d = mu0.dim();
    let has_form = matches!(kind, FlowKind::W | FlowKind::FR | FlowKind::UnitFR)
        || (d == 1 && matches!(kind, FlowKind::WFR | FlowKind::TemperedW));
    if t == 0.0 && has_form {
        return Ok(Some(mu0.clone().at_time(0.0)));
    }
    let out = match kind {
        FlowKind::W => Some(wasserstein(mu0, pi, t)?),
        FlowKind::FR => Some(fisher_rao(mu0, pi, t)?),
        FlowKind::UnitFR => Some(unit_fr(mu0, pi, t)?),
        FlowKind::WFR if d == 1 => Some(wfr_1d(mu0, pi, t)),
        FlowKind::TemperedW if d == 1 => {
            let s = schedule.ok_or_else(|| invalid("schedule", "required for the tempered_w flow"))?;
            Some(tempered_w_1d(mu0, pi, s, t)?)
        }
        _ => None,
    };
    Ok(out)
}

fn wasserstein(mu0: &GaussianState, pi: &GaussianState, t: f64) -> Result<GaussianState> {
    // P = Q D Q^T; in the eigenbasis the covariance ODE decouples entrywise
    let p = spd_inverse(&pi.cov_matrix(), "target covariance")?;
    let eig = SymmetricEigen::new(p);
    let q = &eig.eigenvectors;
    let dvals = &eig.eigenvalues;
    let d = dvals.len();
    let decay = DVector::from_iterator(d, dvals.iter().map(|l| (-l * t).exp()));
    let m_pi = pi.mean_vector();
    let e0 = q.transpose() * (mu0.mean_vector() - &m_pi);
    let m = &m_pi + q * e0.component_mul(&decay);
    let c0 = q.transpose() * mu0.cov_matrix() * q;
    let mut ct = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            ct[(i, j)] = decay[i] * decay[j] * c0[(i, j)];
        }
        // int_0^t 2 e^{-2 l s} ds
        ct[(i, i)] += -(-2.0 * dvals[i] * t).exp_m1() / dvals[i];
    }
    let c = q * ct * q.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Ok(GaussianState::from_parts(&m, &c, t))
}

fn natural_mix(mu0: &GaussianState, pi: &GaussianState, w0: f64, w1: f64, t: f64) -> Result<GaussianState> {
    let p0 = spd_inverse(&mu0.cov_matrix(), "initial covariance")?;
    let p1 = spd_inverse(&pi.cov_matrix(), "target covariance")?;
    let prec = &p0 * w0 + &p1 * w1;
    let c = spd_inverse(&prec, "interpolated precision")?;
    let eta = &p0 * mu0.mean_vector() * w0 + &p1 * pi.mean_vector() * w1;
    let m = &c * eta;
    let c = (&c + c.transpose()) * 0.5;
    Ok(GaussianState::from_parts(&m, &c, t))
}

fn fisher_rao(mu0: &GaussianState, pi: &GaussianState, t: f64) -> Result<GaussianState> {
    // law proportional to mu0^{e^{-t}} pi^{1 - e^{-t}}
    let a = (-t).exp();
    natural_mix(mu0, pi, a, -(-t).exp_m1(), t)
}

fn unit_fr(mu0: &GaussianState, pi: &GaussianState, t: f64) -> Result<GaussianState> {
    if t > 1.0 {
        return Err(invalid("t", format!("the unit-time FR flow is defined on [0, 1], got {t}")));
    }
    if t == 1.0 {
        return Ok(pi.clone().at_time(1.0));
    }
    if t == 0.0 {
        return Ok(mu0.clone().at_time(0.0));
    }
    natural_mix(mu0, pi, 1.0 - t, t, t)
}

fn wfr_1d(mu0: &GaussianState, pi: &GaussianState, t: f64) -> GaussianState {
    let (m0, c0) = (mu0.mean[0], mu0.cov[0]);
    let (mp, cp) = (pi.mean[0], pi.cov[0]);
    let rate = 1.0 + 2.0 / cp;
    let b = 1.0 / (cp + 2.0);
    let u0 = c0 - cp;
    let (m, c) = if u0 == 0.0 {
        (mp + (m0 - mp) * (-(cp + 1.0) / cp * t).exp(), cp)
    } else {
        // u = C - C_pi = e^{-rt} / (A - B e^{-rt}) with A = 1/u0 + B
        let a = 1.0 / u0 + b;
        let er = (-rate * t).exp();
        let u = er / (a - b * er);
        let mean_factor = (-(1.0 + 1.0 / cp) * t).exp() * (a - b) / (a - b * er);
        (mp + (m0 - mp) * mean_factor, cp + u)
    };
    GaussianState {
        mean: vec![m],
        cov: vec![c],
        time: t,
    }
}

/// Explicit tempered-W solution in one dimension.
///
/// With `E(u) = (u - L(u)) / C0 + L(u) / C_pi` and `L(u) = int_0^u lambda`,
/// `m_t = e^{-E(t)} [m0 + int_0^t ((1 - lambda_u) m0 / C0 + lambda_u m_pi / C_pi) e^{E(u)} du]`
/// and `C_t = e^{-2E(t)} [C0 + 2 int_0^t e^{2E(u)} du]`. The integrals are
/// evaluated by adaptive Simpson with the exponentials rescaled by `e^{-E(t)}`.
pub fn tempered_w_1d(
    mu0: &GaussianState,
    pi: &GaussianState,
    schedule: &TemperingSchedule,
    t: f64,
) -> Result<GaussianState> {
    schedule.validate()?;
    if mu0.dim() != 1 || pi.dim() != 1 {
        return Err(Error::Unsupported("tempered W closed form is one-dimensional".into()));
    }
    let (m0, c0) = (mu0.mean[0], mu0.cov[0]);
    let (mp, cp) = (pi.mean[0], pi.cov[0]);
    let e = |u: f64| {
        let l = schedule.cumulative(u);
        (u - l) / c0 + l / cp
    };
    let et = e(t);
    let mean_integrand = |u: f64| {
        let lam = schedule.at(u);
        ((1.0 - lam) * m0 / c0 + lam * mp / cp) * (e(u) - et).exp()
    };
    let cov_integrand = |u: f64| (2.0 * (e(u) - et)).exp();
    let integrate = |f: &dyn Fn(f64) -> f64| match *schedule {
        TemperingSchedule::LinearHorizon(h) if h < t => {
            adaptive_simpson(f, 0.0, h, QUAD_TOL) + adaptive_simpson(f, h, t, QUAD_TOL)
        }
        _ => adaptive_simpson(f, 0.0, t, QUAD_TOL),
    };
    let m = m0 * (-et).exp() + integrate(&mean_integrand);
    let c = c0 * (-2.0 * et).exp() + 2.0 * integrate(&cov_integrand);
    Ok(GaussianState {
        mean: vec![m],
        cov: vec![c],
        time: t,
    })
}
