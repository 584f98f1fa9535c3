use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::{closed_form, spd_inverse, GaussianState};
use crate::error::{invalid, Error, Result};
use crate::schedule::TemperingSchedule;

const MAX_RK4_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowKind {
    W,
    FR,
    /// Geometric bridge `mu0^(1-t) pi^t` on `t in [0, 1]`.
    UnitFR,
    WFR,
    TemperedW,
    TemperedFR,
    TemperedWFR,
}

impl FlowKind {
    pub const ALL: [FlowKind; 7] = [
        FlowKind::W,
        FlowKind::FR,
        FlowKind::UnitFR,
        FlowKind::WFR,
        FlowKind::TemperedW,
        FlowKind::TemperedFR,
        FlowKind::TemperedWFR,
    ];

    pub fn is_tempered(self) -> bool {
        matches!(self, FlowKind::TemperedW | FlowKind::TemperedFR | FlowKind::TemperedWFR)
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FlowKind::W => "w",
            FlowKind::FR => "fr",
            FlowKind::UnitFR => "unit_fr",
            FlowKind::WFR => "wfr",
            FlowKind::TemperedW => "tempered_w",
            FlowKind::TemperedFR => "tempered_fr",
            FlowKind::TemperedWFR => "tempered_wfr",
        };
        f.write_str(s)
    }
}

impl FromStr for FlowKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        FlowKind::ALL
            .into_iter()
            .find(|k| k.to_string() == key)
            .ok_or_else(|| format!("unknown flow `{s}` (expected one of w, fr, unit_fr, wfr, tempered_w, tempered_fr, tempered_wfr)"))
    }
}

/// Cached precisions of the endpoints.
pub(crate) struct Endpoints {
    m_pi: DVector<f64>,
    p_pi: DMatrix<f64>,
    m0: DVector<f64>,
    p0: DMatrix<f64>,
}

impl Endpoints {
    pub(crate) fn new(mu0: &GaussianState, pi: &GaussianState) -> Result<Self> {
        mu0.check()?;
        pi.check()?;
        if mu0.dim() != pi.dim() {
            return Err(Error::DimensionMismatch {
                expected: pi.dim(),
                got: mu0.dim(),
            });
        }
        Ok(Self {
            m_pi: pi.mean_vector(),
            p_pi: spd_inverse(&pi.cov_matrix(), "target covariance")?,
            m0: mu0.mean_vector(),
            p0: spd_inverse(&mu0.cov_matrix(), "initial covariance")?,
        })
    }

    /// Effective precision and mean of `pi^lambda mu0^(1-lambda)`.
    fn path(&self, lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
        if lambda == 1.0 {
            return (self.p_pi.clone(), self.m_pi.clone());
        }
        let p = &self.p_pi * lambda + &self.p0 * (1.0 - lambda);
        let rhs = &self.p_pi * &self.m_pi * lambda + &self.p0 * &self.m0 * (1.0 - lambda);
        let a = p.clone().cholesky().expect("convex combination of SPD matrices").solve(&rhs);
        (p, a)
    }

    fn rhs(&self, kind: FlowKind, m: &DVector<f64>, c: &DMatrix<f64>, lambda: f64) -> (DVector<f64>, DMatrix<f64>) {
        let d = m.len();
        let eye = DMatrix::<f64>::identity(d, d);
        let w = |p: &DMatrix<f64>, a: &DVector<f64>| {
            let dm = -(p * (m - a));
            let dc = -(p * c) - c * p + &eye * 2.0;
            (dm, dc)
        };
        let fr = |p: &DMatrix<f64>, a: &DVector<f64>| {
            let dm = -(c * (p * (m - a)));
            let dc = -(c * p * c) + c;
            (dm, dc)
        };
        match kind {
            FlowKind::W => w(&self.p_pi, &self.m_pi),
            FlowKind::FR => fr(&self.p_pi, &self.m_pi),
            FlowKind::WFR => {
                let (a, b) = w(&self.p_pi, &self.m_pi);
                let (x, y) = fr(&self.p_pi, &self.m_pi);
                (a + x, b + y)
            }
            FlowKind::TemperedW => {
                let (p, a) = self.path(lambda);
                w(&p, &a)
            }
            FlowKind::TemperedFR => {
                let (p, a) = self.path(lambda);
                fr(&p, &a)
            }
            FlowKind::TemperedWFR => {
                let (p, a) = self.path(lambda);
                let (x, y) = w(&p, &a);
                let (u, v) = fr(&p, &a);
                (x + u, y + v)
            }
            FlowKind::UnitFR => {
                // precision (1-t) P0 + t P moves linearly in t
                let dp = &self.p_pi - &self.p0;
                let dm = -(c * (&self.p_pi * (m - &self.m_pi) - &self.p0 * (m - &self.m0)));
                let dc = -(c * dp * c);
                (dm, dc)
            }
        }
    }
}

/// Right-hand side `(dm/dt, dC/dt)` of the moment ODE of `kind` at `state`.
///
/// `lambda_t` is the schedule value at the state's time and is ignored by
/// untempered kinds. The unit-time FR flow is only available through
/// [`evolve`] and [`evolve_rk4`].
pub fn moment_rhs(
    kind: FlowKind,
    state: &GaussianState,
    pi: &GaussianState,
    mu0: &GaussianState,
    lambda_t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if kind == FlowKind::UnitFR {
        return Err(Error::Unsupported(
            "the unit-time FR flow has its own closed form; use evolve".into(),
        ));
    }
    if !(0.0..=1.0).contains(&lambda_t) {
        return Err(invalid("lambda_t", format!("must lie in [0, 1], got {lambda_t}")));
    }
    state.check()?;
    let ends = Endpoints::new(mu0, pi)?;
    if state.dim() != pi.dim() {
        return Err(Error::DimensionMismatch {
            expected: pi.dim(),
            got: state.dim(),
        });
    }
    let (dm, dc) = ends.rhs(kind, &state.mean_vector(), &state.cov_matrix(), lambda_t);
    Ok((dm.as_slice().to_vec(), dc.transpose().as_slice().to_vec()))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("time grid"));
    }
    if grid[0] < 0.0 || grid.iter().any(|t| !t.is_finite()) {
        return Err(invalid("t_grid", "times must be finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("t_grid", "times must be strictly increasing"));
    }
    Ok(())
}

fn schedule_for(kind: FlowKind, schedule: Option<&TemperingSchedule>) -> Result<TemperingSchedule> {
    match (kind.is_tempered(), schedule) {
        (true, None) => Err(invalid("schedule", format!("required for the {kind} flow"))),
        (true, Some(s)) => {
            s.validate()?;
            Ok(*s)
        }
        (false, _) => Ok(TemperingSchedule::constant_one()),
    }
}

fn symmetrize(c: &mut DMatrix<f64>) {
    let t = c.transpose();
    *c += t;
    *c *= 0.5;
}

/// Moment trajectory integrated with fixed-step RK4 for every kind.
///
/// The step is `min(1e-3, spacing / 10)` for each grid interval; covariances
/// are symmetrized after every stage and checked for positive definiteness
/// after every step.
pub fn evolve_rk4(
    kind: FlowKind,
    mu0: &GaussianState,
    pi: &GaussianState,
    schedule: Option<&TemperingSchedule>,
    t_grid: &[f64],
) -> Result<Vec<GaussianState>> {
    check_grid(t_grid)?;
    let sched = schedule_for(kind, schedule)?;
    if kind == FlowKind::UnitFR && *t_grid.last().unwrap() > 1.0 {
        return Err(invalid("t_grid", "the unit-time FR flow is defined on [0, 1]"));
    }
    let ends = Endpoints::new(mu0, pi)?;
    let mut m = mu0.mean_vector();
    let mut c = mu0.cov_matrix();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    let f = |tt: f64, m: &DVector<f64>, c: &DMatrix<f64>| ends.rhs(kind, m, c, sched.at(tt));
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let h_max = MAX_RK4_STEP.min(span / 10.0);
            let steps = (span / h_max).ceil() as usize;
            let h = span / steps as f64;
            let t0 = t;
            for k in 0..steps {
                let s = t0 + k as f64 * h;
                let (k1m, k1c) = f(s, &m, &c);
                let mut c2 = &c + &k1c * (0.5 * h);
                symmetrize(&mut c2);
                let (k2m, k2c) = f(s + 0.5 * h, &(&m + &k1m * (0.5 * h)), &c2);
                let mut c3 = &c + &k2c * (0.5 * h);
                symmetrize(&mut c3);
                let (k3m, k3c) = f(s + 0.5 * h, &(&m + &k2m * (0.5 * h)), &c3);
                let mut c4 = &c + &k3c * h;
                symmetrize(&mut c4);
                let (k4m, k4c) = f(s + h, &(&m + &k3m * h), &c4);
                m += (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (h / 6.0);
                c += (k1c + k2c * 2.0 + k3c * 2.0 + k4c) * (h / 6.0);
                symmetrize(&mut c);
                let now = s + h;
                if m.iter().chain(c.iter()).any(|v| !v.is_finite()) || c.clone().cholesky().is_none() {
                    return Err(Error::IntegrationBlowup { time: now });
                }
            }
            t = target;
        }
        out.push(GaussianState::from_parts(&m, &c, target));
    }
    Ok(out)
}

/// Moment trajectory on `t_grid`: the closed form where one exists, RK4 otherwise.
pub fn evolve(
    kind: FlowKind,
    mu0: &GaussianState,
    pi: &GaussianState,
    schedule: Option<&TemperingSchedule>,
    t_grid: &[f64],
) -> Result<Vec<GaussianState>> {
    check_grid(t_grid)?;
    schedule_for(kind, schedule)?;
    let probe = closed_form(kind, mu0, pi, schedule, t_grid[0])?;
    if probe.is_none() {
        return evolve_rk4(kind, mu0, pi, schedule, t_grid);
    }
    t_grid
        .iter()
        .map(|&t| closed_form(kind, mu0, pi, schedule, t).map(|s| s.expect("closed form available")))
        .collect()
}

/// Unit-time FR state at `t` and the FR state at `tau = -log(1 - t)`.
pub fn unit_fr_time_rescaling_check(
    mu0: &GaussianState,
    pi: &GaussianState,
    t: f64,
) -> Result<(GaussianState, GaussianState)> {
    if !(0.0..1.0).contains(&t) {
        return Err(invalid("t", format!("must lie in [0, 1), got {t}")));
    }
    let unit = closed_form(FlowKind::UnitFR, mu0, pi, None, t)?.expect("closed form");
    let tau = -(-t).ln_1p();
    let fr = closed_form(FlowKind::FR, mu0, pi, None, tau)?.expect("closed form");
    Ok((unit, fr))
}
