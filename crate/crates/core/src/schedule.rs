//! Tempering schedules `lambda: [0, inf) -> [0, 1]` and the Fisher-Rao
//! exponents derived from them.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result};
use crate::quadrature::adaptive_simpson;
use crate::targets::parse_call;

const WINDOW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemperingSchedule {
    /// `lambda(s) = c`. `Constant(1.0)` is the untempered flow.
    Constant(f64),
    /// `lambda(s) = min(s / horizon, 1)`.
    LinearHorizon(f64),
    /// `lambda(s) = 1 - exp(-alpha s)`.
    Exponential(f64),
    /// `lambda(s) = 1 - 1 / (2 + s)`.
    OptimalOneOver,
}

impl TemperingSchedule {
    pub fn constant_one() -> Self {
        TemperingSchedule::Constant(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TemperingSchedule::Constant(c) if !(0.0..=1.0).contains(&c) => {
                Err(invalid("schedule", format!("constant must lie in [0, 1], got {c}")))
            }
            TemperingSchedule::LinearHorizon(t) if !(t.is_finite() && t > 0.0) => {
                Err(invalid("schedule", format!("linear horizon must be positive, got {t}")))
            }
            TemperingSchedule::Exponential(a) if !(a.is_finite() && a > 0.0) => {
                Err(invalid("schedule", format!("exponential rate must be positive, got {a}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_constant_one(&self) -> bool {
        matches!(self, TemperingSchedule::Constant(c) if *c == 1.0)
    }

    /// `lambda(s)` for `s >= 0`.
    pub fn at(&self, s: f64) -> f64 {
        match *self {
            TemperingSchedule::Constant(c) => c,
            TemperingSchedule::LinearHorizon(t) => (s / t).min(1.0),
            TemperingSchedule::Exponential(a) => -(-a * s).exp_m1(),
            TemperingSchedule::OptimalOneOver => 1.0 - 1.0 / (2.0 + s),
        }
    }

    /// `int_0^u lambda(s) ds`.
    pub fn cumulative(&self, u: f64) -> f64 {
        match *self {
            TemperingSchedule::Constant(c) => c * u,
            TemperingSchedule::LinearHorizon(t) => {
                if u <= t {
                    u * u / (2.0 * t)
                } else {
                    0.5 * t + (u - t)
                }
            }
            TemperingSchedule::Exponential(a) => u + (-a * u).exp_m1() / a,
            TemperingSchedule::OptimalOneOver => u - (1.0 + 0.5 * u).ln(),
        }
    }

    /// Fisher-Rao exponent over the window `[t_start, t_start + gamma]`:
    /// `int_0^gamma exp(s - gamma) lambda(t_start + s) ds`.
    pub fn window_exponent(&self, t_start: f64, gamma: f64) -> f64 {
        let em = (-gamma).exp_m1(); // exp(-gamma) - 1
        match *self {
            TemperingSchedule::Constant(c) => -c * em,
            TemperingSchedule::LinearHorizon(t) => {
                if t_start >= t {
                    -em
                } else if t_start + gamma <= t {
                    // (t0 (1 - e^-g) + (g - 1 + e^-g)) / T
                    (t_start * (-em) + (gamma + em)) / t
                } else {
                    let a = t - t_start;
                    // int_0^a e^{s-g} (t0 + s)/T ds + int_a^g e^{s-g} ds
                    let ea = a.exp();
                    let ramp = (-gamma).exp() * (t_start * a.exp_m1() + (a * ea - ea + 1.0)) / t;
                    ramp - (a - gamma).exp_m1()
                }
            }
            TemperingSchedule::Exponential(alpha) => {
                let inner = if (1.0 - alpha).abs() < 1e-12 {
                    gamma
                } else {
                    ((1.0 - alpha) * gamma).exp_m1() / (1.0 - alpha)
                };
                -em - (-alpha * t_start - gamma).exp() * inner
            }
            TemperingSchedule::OptimalOneOver => self.window_exponent_quadrature(t_start, gamma),
        }
    }

    /// The same window integral evaluated by adaptive Simpson.
    pub fn window_exponent_quadrature(&self, t_start: f64, gamma: f64) -> f64 {
        let f = |s: f64| (s - gamma).exp() * self.at(t_start + s);
        match *self {
            // split at the kink so Simpson sees smooth pieces
            TemperingSchedule::LinearHorizon(t) if t_start < t && t < t_start + gamma => {
                let a = t - t_start;
                adaptive_simpson(f, 0.0, a, WINDOW_TOL) + adaptive_simpson(f, a, gamma, WINDOW_TOL)
            }
            _ => adaptive_simpson(f, 0.0, gamma, WINDOW_TOL),
        }
    }

    /// First-order alternative `lambda(t_start + gamma) (1 - exp(-gamma))`.
    pub fn first_order_exponent(&self, t_start: f64, gamma: f64) -> f64 {
        -self.at(t_start + gamma) * (-gamma).exp_m1()
    }
}

impl fmt::Display for TemperingSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemperingSchedule::Constant(c) if *c == 1.0 => write!(f, "constant_one"),
            TemperingSchedule::Constant(c) => write!(f, "constant({c})"),
            TemperingSchedule::LinearHorizon(t) => write!(f, "linear_horizon({t})"),
            TemperingSchedule::Exponential(a) => write!(f, "exponential({a})"),
            TemperingSchedule::OptimalOneOver => write!(f, "optimal_one_over"),
        }
    }
}

impl FromStr for TemperingSchedule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (name, args) = parse_call(s)?;
        let one = |what: &str| match args.as_slice() {
            [v] => Ok(*v),
            [] => Err(format!("`{name}` requires {what}")),
            _ => Err(format!("`{name}` takes a single argument ({what})")),
        };
        let none = || {
            if args.is_empty() {
                Ok(())
            } else {
                Err(format!("`{name}` takes no arguments"))
            }
        };
        let schedule = match name.as_str() {
            "constant_one" => {
                none()?;
                TemperingSchedule::constant_one()
            }
            "constant" => TemperingSchedule::Constant(one("a value in [0, 1]")?),
            "linear_horizon" | "linear" => TemperingSchedule::LinearHorizon(one("a horizon T")?),
            "exponential" => TemperingSchedule::Exponential(one("a rate alpha")?),
            "optimal_one_over" => {
                none()?;
                TemperingSchedule::OptimalOneOver
            }
            other => return Err(format!("unknown schedule `{other}`")),
        };
        schedule.validate().map_err(|e| e.to_string())?;
        Ok(schedule)
    }
}

/// Exponent of a mirror-descent / Fisher-Rao reweighting step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrExponent(f64);

impl FrExponent {
    pub fn new(delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(invalid("delta", format!("must lie in [0, 1], got {delta}")));
        }
        Ok(Self(delta))
    }

    /// `1 - exp(-gamma)`.
    pub fn standard(gamma: f64) -> Self {
        Self(-(-gamma).exp_m1())
    }

    /// Window exponent of the `n`-th step (1-based), over `[(n-1) gamma, n gamma]`.
    pub fn tempered(schedule: &TemperingSchedule, n: usize, gamma: f64) -> Self {
        Self(schedule.window_exponent((n - 1) as f64 * gamma, gamma))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_one_matches_standard_exponent() {
        let s = TemperingSchedule::constant_one();
        for g in [0.001, 0.05, 0.1, 1.0] {
            assert_eq!(s.window_exponent(3.0, g), FrExponent::standard(g).get());
        }
        assert_eq!(TemperingSchedule::Constant(0.0).window_exponent(0.0, 0.1), 0.0);
    }

    #[test]
    fn linear_window_closed_form() {
        // delta = (gamma - 1 + e^-gamma) / T on the first window
        let t = 7.0;
        let s = TemperingSchedule::LinearHorizon(t);
        for g in [0.001, 0.05, 0.1, 0.5] {
            let expect = (g - 1.0 + (-g as f64).exp()) / t;
            assert!((s.window_exponent(0.0, g) - expect).abs() < 1e-8 * expect);
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let schedules = [
            TemperingSchedule::LinearHorizon(2.0),
            TemperingSchedule::LinearHorizon(0.37),
            TemperingSchedule::Exponential(0.01),
            TemperingSchedule::Exponential(1.0),
            TemperingSchedule::Exponential(3.5),
            TemperingSchedule::Constant(0.4),
        ];
        for s in schedules {
            for t0 in [0.0, 0.1, 0.3, 1.95, 2.5] {
                for g in [0.001, 0.05, 0.1, 0.4] {
                    let a = s.window_exponent(t0, g);
                    let b = s.window_exponent_quadrature(t0, g);
                    assert!((a - b).abs() < 1e-8, "{s} t0={t0} g={g}: {a} vs {b}");
                    assert!(a >= 0.0 && a <= -(-g as f64).exp_m1() + 1e-15);
                }
            }
        }
    }

    #[test]
    fn schedule_values_and_monotonicity() {
        let all = [
            TemperingSchedule::constant_one(),
            TemperingSchedule::LinearHorizon(3.0),
            TemperingSchedule::Exponential(0.01),
            TemperingSchedule::OptimalOneOver,
        ];
        for s in all {
            let mut prev = s.at(0.0);
            for k in 1..200 {
                let v = s.at(k as f64 * 0.05);
                assert!(v >= prev && (0.0..=1.0).contains(&v));
                prev = v;
            }
        }
        assert_eq!(TemperingSchedule::OptimalOneOver.at(0.0), 0.5);
        assert_eq!(TemperingSchedule::LinearHorizon(2.0).at(5.0), 1.0);
    }

    #[test]
    fn cumulative_matches_quadrature() {
        let all = [
            TemperingSchedule::Constant(0.3),
            TemperingSchedule::LinearHorizon(3.0),
            TemperingSchedule::Exponential(0.7),
            TemperingSchedule::OptimalOneOver,
        ];
        for s in all {
            for u in [0.0, 0.5, 2.0, 4.0] {
                let q = if u > 3.0 {
                    adaptive_simpson(|x| s.at(x), 0.0, 3.0, 1e-13)
                        + adaptive_simpson(|x| s.at(x), 3.0, u, 1e-13)
                } else {
                    adaptive_simpson(|x| s.at(x), 0.0, u, 1e-13)
                };
                assert!((s.cumulative(u) - q).abs() < 1e-10, "{s} {u}");
            }
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("constant_one".parse::<TemperingSchedule>().unwrap(), TemperingSchedule::constant_one());
        assert_eq!(
            "linear_horizon(10)".parse::<TemperingSchedule>().unwrap(),
            TemperingSchedule::LinearHorizon(10.0)
        );
        assert!("linear_horizon".parse::<TemperingSchedule>().is_err());
        assert!("linear_horizon()".parse::<TemperingSchedule>().is_err());
        assert!("exponential(-1)".parse::<TemperingSchedule>().is_err());
        assert!("constant(2)".parse::<TemperingSchedule>().is_err());
        assert!("cosine".parse::<TemperingSchedule>().is_err());
        for s in ["constant_one", "constant(0)", "linear_horizon(2.5)", "exponential(0.01)", "optimal_one_over"] {
            let p: TemperingSchedule = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
    }

    #[test]
    fn fr_exponent_bounds() {
        assert!(FrExponent::new(1.2).is_err());
        assert!(FrExponent::new(-0.1).is_err());
        let d = FrExponent::tempered(&TemperingSchedule::LinearHorizon(1.0), 1, 0.1);
        assert!(d.get() > 0.0 && d.get() < FrExponent::standard(0.1).get());
    }
}
