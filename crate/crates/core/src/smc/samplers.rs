use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use rand::Rng;

use super::kernels::{rwm_step, tempered_ula_step, ula_step};
use super::resample::{resample, Resampling};
use super::weights::{fr_log_weights, tempering_log_weights};
use crate::error::{invalid, Error, Result};
use crate::particles::{ParticleSystem, StepSize};
use crate::schedule::{FrExponent, TemperingSchedule};
use crate::targets::{GeometricPathTarget, Target};
use crate::weights::logsumexp;

/// Consecutive near one-hot iterations tolerated before aborting.
const COLLAPSE_PATIENCE: usize = 3;
const ONE_HOT_SLACK: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResamplePolicy {
    /// Resample before every move after the first.
    Always,
    /// Resample only when ESS / N drops below the threshold.
    EssThreshold(f64),
}

impl fmt::Display for ResamplePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResamplePolicy::Always => write!(f, "always"),
            ResamplePolicy::EssThreshold(t) => write!(f, "ess_threshold({t})"),
        }
    }
}

impl FromStr for ResamplePolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s == "always" {
            return Ok(ResamplePolicy::Always);
        }
        match crate::targets::parse_call(s)? {
            (name, args) if name == "ess_threshold" && args.len() == 1 => Ok(ResamplePolicy::EssThreshold(args[0])),
            _ => Err(format!("unknown resample policy `{s}` (expected always or ess_threshold(tau))")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    pub gamma: StepSize,
    pub schedule: TemperingSchedule,
    pub resampling: Resampling,
    pub resample_policy: ResamplePolicy,
    /// Random walk Metropolis proposal scale for the unit-time FR sampler.
    pub rwm_sigma: f64,
}

impl SamplerConfig {
    pub fn new(n_particles: usize, n_iterations: usize, gamma: f64) -> Result<Self> {
        let c = Self {
            n_particles,
            n_iterations,
            gamma: StepSize::new(gamma)?,
            schedule: TemperingSchedule::constant_one(),
            resampling: Resampling::Multinomial,
            resample_policy: ResamplePolicy::Always,
            rwm_sigma: 0.5,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_schedule(mut self, schedule: TemperingSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("n_particles", "must be at least 1"));
        }
        StepSize::new(self.gamma.get())?;
        self.schedule.validate()?;
        if let ResamplePolicy::EssThreshold(t) = self.resample_policy {
            if !(t > 0.0 && t <= 1.0) {
                return Err(invalid("resample_policy", format!("ESS threshold must lie in (0, 1], got {t}")));
            }
        }
        if !(self.rwm_sigma.is_finite() && self.rwm_sigma > 0.0) {
            return Err(invalid("rwm_sigma", format!("must be positive, got {}", self.rwm_sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    SmcWfr,
    TemperedSmcWfr,
    UnitFrSmc,
    TemperingSmc,
    Ula,
    TemperedUla,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::SmcWfr,
        Algorithm::TemperedSmcWfr,
        Algorithm::UnitFrSmc,
        Algorithm::TemperingSmc,
        Algorithm::Ula,
        Algorithm::TemperedUla,
    ];

    pub fn is_weighted(self) -> bool {
        !matches!(self, Algorithm::Ula | Algorithm::TemperedUla)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::SmcWfr => "smc_wfr",
            Algorithm::TemperedSmcWfr => "tempered_smc_wfr",
            Algorithm::UnitFrSmc => "unit_fr_smc",
            Algorithm::TemperingSmc => "tempering_smc",
            Algorithm::Ula => "ula",
            Algorithm::TemperedUla => "tempered_ula",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.to_string() == s.trim())
            .ok_or_else(|| format!("unknown sampler `{s}`"))
    }
}

/// Every state of a run, indexed by iteration (entry 0 is the initial cloud).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<ParticleSystem>,
}

impl Trajectory {
    pub fn final_state(&self) -> &ParticleSystem {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn initial_cloud<R: Rng>(config: &SamplerConfig, mu0: &dyn Target, rng: &mut R) -> Result<ParticleSystem> {
    let positions = mu0.sample_exact(config.n_particles, rng)?;
    ParticleSystem::from_positions(positions, mu0.dim())
}

struct CollapseGuard {
    streak: usize,
}

impl CollapseGuard {
    fn check(&mut self, lw: &[f64], iteration: usize) -> Result<()> {
        let lse = logsumexp(lw);
        if !lse.is_finite() {
            return Err(Error::WeightCollapse {
                iteration,
                reason: format!("log-sum-exp of the weights is {lse}"),
            });
        }
        let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lw.len() > 1 && (top - lse).exp() >= 1.0 - ONE_HOT_SLACK {
            self.streak += 1;
            if self.streak >= COLLAPSE_PATIENCE {
                return Err(Error::WeightCollapse {
                    iteration,
                    reason: format!("a single particle carried all the weight for {} iterations", self.streak),
                });
            }
        } else {
            self.streak = 0;
        }
        Ok(())
    }
}

/// Runs `algorithm` for `config.n_iterations` steps from exact draws of `mu0`.
///
/// `observer` sees the initial cloud and the weighted cloud after every
/// iteration; returning `ControlFlow::Break` stops the run early. The final
/// cloud is returned.
pub fn run<R: Rng>(
    algorithm: Algorithm,
    config: &SamplerConfig,
    mu0: &dyn Target,
    pi: &dyn Target,
    rng: &mut R,
    observer: &mut dyn FnMut(&ParticleSystem) -> ControlFlow<()>,
) -> Result<ParticleSystem> {
    config.validate()?;
    if mu0.dim() != pi.dim() {
        return Err(Error::DimensionMismatch {
            expected: pi.dim(),
            got: mu0.dim(),
        });
    }
    if matches!(algorithm, Algorithm::SmcWfr | Algorithm::TemperedSmcWfr) && config.n_particles < 2 {
        return Err(invalid("n_particles", "the mixture weight denominator needs at least 2 particles"));
    }
    let gamma = config.gamma.get();
    let sched = match algorithm {
        Algorithm::SmcWfr | Algorithm::Ula => TemperingSchedule::constant_one(),
        _ => config.schedule,
    };
    let mut ps = initial_cloud(config, mu0, rng)?;
    if observer(&ps).is_break() {
        return Ok(ps);
    }
    let mut guard = CollapseGuard { streak: 0 };
    let mut lambda_prev = 0.0;
    for n in 1..=config.n_iterations {
        let t_n = n as f64 * gamma;
        let lambda_n = sched.at(t_n);
        if algorithm.is_weighted() && n > 1 {
            let due = match config.resample_policy {
                ResamplePolicy::Always => true,
                ResamplePolicy::EssThreshold(tau) => ps.ess()? < tau * ps.len() as f64,
            };
            if due {
                ps = resample(&ps, config.resampling, rng)?;
            }
        }
        let mut next = match algorithm {
            Algorithm::SmcWfr | Algorithm::TemperedSmcWfr => {
                let (mut next, drift) = match algorithm {
                    Algorithm::SmcWfr => ula_step(&ps, pi, gamma, rng)?,
                    _ => tempered_ula_step(&ps, mu0, pi, lambda_n, gamma, rng)?,
                };
                let delta = match algorithm {
                    Algorithm::SmcWfr => FrExponent::standard(gamma),
                    _ => FrExponent::tempered(&sched, n, gamma),
                };
                let log_prev = if ps.has_uniform_weights() {
                    None
                } else {
                    let lse = logsumexp(ps.log_weights());
                    Some(ps.log_weights().iter().map(|w| w - lse).collect::<Vec<_>>())
                };
                let inc = fr_log_weights(next.positions(), &drift, log_prev.as_deref(), pi, gamma, delta.get());
                for (w, i) in next.log_weights_mut().iter_mut().zip(inc) {
                    *w += i;
                }
                next
            }
            Algorithm::TemperingSmc => {
                let (mut next, _) = tempered_ula_step(&ps, mu0, pi, lambda_n, gamma, rng)?;
                let inc = tempering_log_weights(next.positions(), mu0, pi, lambda_n - lambda_prev);
                for (w, i) in next.log_weights_mut().iter_mut().zip(inc) {
                    *w += i;
                }
                next
            }
            Algorithm::UnitFrSmc => {
                let eta_prev = GeometricPathTarget::new(mu0, pi, lambda_prev)?;
                let (mut next, _) = rwm_step(&ps, &eta_prev, config.rwm_sigma, rng)?;
                let inc = tempering_log_weights(next.positions(), mu0, pi, lambda_n - lambda_prev);
                for (w, i) in next.log_weights_mut().iter_mut().zip(inc) {
                    *w += i;
                }
                next
            }
            Algorithm::Ula => ula_step(&ps, pi, gamma, rng)?.0,
            Algorithm::TemperedUla => tempered_ula_step(&ps, mu0, pi, lambda_n, gamma, rng)?.0,
        };
        next.iteration = n;
        if algorithm.is_weighted() {
            guard.check(next.log_weights(), n)?;
        }
        lambda_prev = lambda_n;
        ps = next;
        if observer(&ps).is_break() {
            break;
        }
    }
    Ok(ps)
}

fn record<R: Rng>(
    algorithm: Algorithm,
    config: &SamplerConfig,
    mu0: &dyn Target,
    pi: &dyn Target,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(config.n_iterations + 1);
    run(algorithm, config, mu0, pi, rng, &mut |ps| {
        states.push(ps.clone());
        ControlFlow::Continue(())
    })?;
    Ok(Trajectory { states })
}

/// SMC-WFR: ULA move followed by Fisher-Rao reweighting against the
/// drift-point mixture, resampling before every move after the first.
pub fn run_smc_wfr<R: Rng>(config: &SamplerConfig, mu0: &dyn Target, pi: &dyn Target, rng: &mut R) -> Result<Trajectory> {
    record(Algorithm::SmcWfr, config, mu0, pi, rng)
}

/// Tempered SMC-WFR: tempered ULA move and window-integrated Fisher-Rao exponent.
pub fn run_tempered_smc_wfr<R: Rng>(
    config: &SamplerConfig,
    mu0: &dyn Target,
    pi: &dyn Target,
    rng: &mut R,
) -> Result<Trajectory> {
    record(Algorithm::TemperedSmcWfr, config, mu0, pi, rng)
}

/// Unit-time FR SMC: one RWM sweep invariant for the previous bridge law,
/// then tempering weights `(pi / mu0)^(lambda_n - lambda_{n-1})`.
pub fn run_unit_fr_smc<R: Rng>(config: &SamplerConfig, mu0: &dyn Target, pi: &dyn Target, rng: &mut R) -> Result<Trajectory> {
    record(Algorithm::UnitFrSmc, config, mu0, pi, rng)
}

/// Tempering SMC: tempered ULA proposal with tempering weights.
pub fn run_tempering_smc<R: Rng>(config: &SamplerConfig, mu0: &dyn Target, pi: &dyn Target, rng: &mut R) -> Result<Trajectory> {
    record(Algorithm::TemperingSmc, config, mu0, pi, rng)
}

/// N independent (tempered) ULA chains started from `mu0`.
pub fn run_ula_baseline<R: Rng>(config: &SamplerConfig, mu0: &dyn Target, pi: &dyn Target, rng: &mut R) -> Result<Trajectory> {
    let alg = if config.schedule.is_constant_one() {
        Algorithm::Ula
    } else {
        Algorithm::TemperedUla
    };
    record(alg, config, mu0, pi, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::targets::GaussianTarget;

    fn gauss(m: f64, c: f64) -> GaussianTarget {
        GaussianTarget::univariate(m, c).unwrap()
    }

    #[test]
    fn single_particle_is_rejected() {
        let cfg = SamplerConfig::new(1, 5, 0.1).unwrap();
        let g = gauss(0.0, 1.0);
        let mut rng = RngStream::new(1, 0).rng();
        assert!(run_smc_wfr(&cfg, &g, &g, &mut rng).is_err());
        assert!(run_tempered_smc_wfr(&cfg, &g, &g, &mut rng).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(0, 5, 0.1).is_err());
        assert!(SamplerConfig::new(5, 5, -0.1).is_err());
        let mut c = SamplerConfig::new(5, 5, 0.1).unwrap();
        c.resample_policy = ResamplePolicy::EssThreshold(1.5);
        assert!(c.validate().is_err());
        c.resample_policy = ResamplePolicy::Always;
        c.rwm_sigma = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn trajectory_shape_and_iterations() {
        let cfg = SamplerConfig::new(20, 7, 0.05).unwrap();
        let mu0 = gauss(0.0, 1.0);
        let pi = gauss(2.0, 0.5);
        for alg in Algorithm::ALL {
            let mut rng = RngStream::new(3, 0).rng();
            let mut seen = Vec::new();
            let cfg = cfg.clone().with_schedule(TemperingSchedule::LinearHorizon(0.2));
            run(alg, &cfg, &mu0, &pi, &mut rng, &mut |ps| {
                seen.push(ps.iteration);
                ControlFlow::Continue(())
            })
            .unwrap();
            assert_eq!(seen, (0..=7).collect::<Vec<_>>(), "{alg}");
        }
    }

    #[test]
    fn observer_can_stop_early() {
        let cfg = SamplerConfig::new(10, 50, 0.05).unwrap();
        let g = gauss(0.0, 1.0);
        let mut rng = RngStream::new(3, 0).rng();
        let last = run(Algorithm::SmcWfr, &cfg, &g, &g, &mut rng, &mut |ps| {
            if ps.iteration == 4 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!(last.iteration, 4);
    }

    #[test]
    fn zero_lambda_increment_gives_zero_weights() {
        let cfg = SamplerConfig::new(30, 3, 0.1)
            .unwrap()
            .with_schedule(TemperingSchedule::Constant(0.0));
        let mu0 = gauss(0.0, 1.0);
        let pi = gauss(5.0, 1.0);
        for alg in [Algorithm::TemperingSmc, Algorithm::UnitFrSmc] {
            let t = record(alg, &cfg, &mu0, &pi, &mut RngStream::new(9, 0).rng()).unwrap();
            for s in &t.states {
                assert!(s.log_weights().iter().all(|w| *w == 0.0));
            }
        }
    }

    #[test]
    fn ula_baseline_is_unweighted() {
        let cfg = SamplerConfig::new(30, 10, 0.1).unwrap();
        let g = gauss(0.0, 1.0);
        let t = run_ula_baseline(&cfg, &g, &g, &mut RngStream::new(2, 0).rng()).unwrap();
        assert!(t.states.iter().all(|s| s.has_uniform_weights()));
    }

    #[test]
    fn ess_policy_keeps_weights_when_healthy() {
        let mut cfg = SamplerConfig::new(200, 5, 0.01).unwrap();
        cfg.resample_policy = ResamplePolicy::EssThreshold(0.1);
        let g = gauss(0.0, 1.0);
        let t = run_smc_wfr(&cfg, &g, &g, &mut RngStream::new(2, 0).rng()).unwrap();
        assert!(t.final_state().ess().unwrap() > 100.0);
    }

    #[test]
    fn parse_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("ess_threshold(0.5)".parse::<ResamplePolicy>().unwrap(), ResamplePolicy::EssThreshold(0.5));
        assert!("sometimes".parse::<ResamplePolicy>().is_err());
    }
}
