use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use toml::{Table, Value};

use crate::bdl::{BdlConfig, RateVariant};
use crate::error::Result;
use crate::metrics::MmdForm;
use crate::schedule::TemperingSchedule;
use crate::smc::{Algorithm, ResamplePolicy, Resampling, SamplerConfig};
use crate::targets::{Target, TargetModel, TargetPreset};

/// Every sampler the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Smc(Algorithm),
    Bdl(RateVariant),
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 8] = [
        SamplerKind::Smc(Algorithm::SmcWfr),
        SamplerKind::Smc(Algorithm::TemperedSmcWfr),
        SamplerKind::Smc(Algorithm::UnitFrSmc),
        SamplerKind::Smc(Algorithm::TemperingSmc),
        SamplerKind::Smc(Algorithm::Ula),
        SamplerKind::Smc(Algorithm::TemperedUla),
        SamplerKind::Bdl(RateVariant::Pde),
        SamplerKind::Bdl(RateVariant::Kl),
    ];

    /// Whether the sampler follows a tempering schedule.
    pub fn uses_schedule(self) -> bool {
        matches!(
            self,
            SamplerKind::Smc(Algorithm::TemperedSmcWfr | Algorithm::UnitFrSmc | Algorithm::TemperingSmc | Algorithm::TemperedUla)
        )
    }

    /// Groups a sampler with its tempered counterpart: `wfr`, `w`, or its own name.
    pub fn family(self) -> &'static str {
        match self {
            SamplerKind::Smc(Algorithm::SmcWfr | Algorithm::TemperedSmcWfr) => "wfr",
            SamplerKind::Smc(Algorithm::Ula | Algorithm::TemperedUla) => "w",
            SamplerKind::Smc(Algorithm::UnitFrSmc) => "unit_fr_smc",
            SamplerKind::Smc(Algorithm::TemperingSmc) => "tempering_smc",
            SamplerKind::Bdl(RateVariant::Pde) => "bdl_pde",
            SamplerKind::Bdl(RateVariant::Kl) => "bdl_kl",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerKind::Smc(a) => write!(f, "{a}"),
            SamplerKind::Bdl(v) => write!(f, "bdl_{v}"),
        }
    }
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s.trim())
            .ok_or_else(|| {
                let names: Vec<String> = SamplerKind::ALL.iter().map(|k| k.to_string()).collect();
                format!("unknown sampler `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    Wallclock,
    /// Writes zeros in the `wallclock_s` column so outputs are byte-reproducible.
    Off,
}

impl FromStr for Timing {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "wallclock" => Ok(Timing::Wallclock),
            "off" => Ok(Timing::Off),
            other => Err(format!("unknown timing `{other}` (expected wallclock or off)")),
        }
    }
}

impl fmt::Display for Timing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Timing::Wallclock => "wallclock",
            Timing::Off => "off",
        })
    }
}

/// A fully validated experiment.
///
/// Config files are TOML with three optional sections:
///
/// ```toml
/// [experiment]
/// sampler = "smc_wfr"            # required
/// target = "four_mode"           # required
/// mu0 = "four_mode_init"         # default: standard normal in the target dimension
/// seed = 0
/// replicates = 10
/// output = "out/four_mode"          # default: no files written
///
/// [sampler]
/// n_particles = 500
/// n_iterations = 1000
/// gamma = 0.05
/// schedule = "constant_one"
/// resampling = "multinomial"     # or "systematic"
/// resample_policy = "always"     # or "ess_threshold(0.5)"
/// rwm_sigma = 0.5
/// kde_bandwidth = 0.05           # bdl only, default gamma
///
/// [metrics]
/// cadence = 10
/// threshold = 0.05
/// mmd_form = "squared"           # or "root"
/// reference_size = 10000
/// reference_seed = 20240611
/// timing = "wallclock"           # or "off"
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sampler: SamplerKind,
    pub target: TargetPreset,
    pub mu0: TargetPreset,
    pub seed: u64,
    pub replicates: usize,
    pub output: Option<PathBuf>,
    pub n_particles: usize,
    pub n_iterations: usize,
    pub gamma: f64,
    pub schedule: TemperingSchedule,
    pub resampling: Resampling,
    pub resample_policy: ResamplePolicy,
    pub rwm_sigma: f64,
    pub kde_bandwidth: Option<f64>,
    pub cadence: usize,
    pub threshold: f64,
    pub mmd_form: MmdForm,
    pub reference_size: usize,
    pub reference_seed: u64,
    pub timing: Timing,
}

pub const DEFAULT_REPLICATES: usize = 10;
pub const PAPER_REPLICATES: usize = 50;
pub const DEFAULT_REFERENCE_SEED: u64 = 20240611;

impl ExperimentConfig {
    /// Defaults for everything except the sampler and target.
    pub fn new(sampler: SamplerKind, target: TargetPreset) -> Self {
        let mu0 = standard_normal_preset(&target);
        Self {
            sampler,
            target,
            mu0,
            seed: 0,
            replicates: DEFAULT_REPLICATES,
            output: None,
            n_particles: 500,
            n_iterations: 1000,
            gamma: 0.05,
            schedule: TemperingSchedule::constant_one(),
            resampling: Resampling::Multinomial,
            resample_policy: ResamplePolicy::Always,
            rwm_sigma: 0.5,
            kde_bandwidth: None,
            cadence: 10,
            threshold: 0.05,
            mmd_form: MmdForm::Squared,
            reference_size: 10_000,
            reference_seed: DEFAULT_REFERENCE_SEED,
            timing: Timing::Wallclock,
        }
    }

    /// Bandwidth actually used by the birth-death samplers.
    pub fn bandwidth(&self) -> f64 {
        self.kde_bandwidth.unwrap_or(self.gamma)
    }

    /// Short label such as `tempered_ula[exponential(0.01)]`.
    pub fn label(&self) -> String {
        if self.sampler.uses_schedule() {
            format!("{}[{}]", self.sampler, self.schedule)
        } else {
            self.sampler.to_string()
        }
    }

    /// Schedule the sampler effectively follows.
    pub fn effective_schedule(&self) -> TemperingSchedule {
        if self.sampler.uses_schedule() {
            self.schedule
        } else {
            TemperingSchedule::constant_one()
        }
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        self.check_into(&mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }

    fn check_into(&self, errs: &mut Vec<String>) {
        if self.replicates == 0 {
            errs.push("experiment.replicates: must be at least 1".into());
        }
        if self.n_particles == 0 {
            errs.push("sampler.n_particles: must be positive".into());
        }
        if self.n_iterations == 0 {
            errs.push("sampler.n_iterations: must be positive".into());
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            errs.push(format!("sampler.gamma: must be positive, got {}", self.gamma));
        }
        if let ResamplePolicy::EssThreshold(t) = self.resample_policy {
            if !(t > 0.0 && t <= 1.0) {
                errs.push(format!("sampler.resample_policy: ESS threshold must lie in (0, 1], got {t}"));
            }
        }
        if !(self.rwm_sigma.is_finite() && self.rwm_sigma > 0.0) {
            errs.push(format!("sampler.rwm_sigma: must be positive, got {}", self.rwm_sigma));
        }
        if let Some(h) = self.kde_bandwidth {
            if !(h.is_finite() && h > 0.0) {
                errs.push(format!("sampler.kde_bandwidth: must be positive, got {h}"));
            }
            if !matches!(self.sampler, SamplerKind::Bdl(_)) {
                errs.push(format!("sampler.kde_bandwidth: only used by bdl samplers, not {}", self.sampler));
            }
        }
        if !self.sampler.uses_schedule() && !self.schedule.is_constant_one() {
            errs.push(format!(
                "sampler.schedule: `{}` is untempered; use its tempered variant to follow `{}`",
                self.sampler, self.schedule
            ));
        }
        if self.cadence == 0 {
            errs.push("metrics.cadence: must be at least 1".into());
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            errs.push(format!("metrics.threshold: must be positive, got {}", self.threshold));
        }
        if self.reference_size == 0 {
            errs.push("metrics.reference_size: must be positive".into());
        }
        match (self.target.build(), self.mu0.build()) {
            (Ok(t), Ok(m)) if t.dim() != m.dim() => errs.push(format!(
                "experiment.mu0: dimension {} does not match the target dimension {}",
                m.dim(),
                t.dim()
            )),
            (t, m) => {
                if let Err(e) = t {
                    errs.push(format!("experiment.target: {e}"));
                }
                if let Err(e) = m {
                    errs.push(format!("experiment.mu0: {e}"));
                }
            }
        }
    }

    pub fn build_target(&self) -> Result<TargetModel> {
        self.target.build()
    }

    pub fn build_mu0(&self) -> Result<TargetModel> {
        self.mu0.build()
    }

    pub fn sampler_config(&self) -> Result<SamplerConfig> {
        let mut c = SamplerConfig::new(self.n_particles, self.n_iterations, self.gamma)?.with_schedule(self.schedule);
        c.resampling = self.resampling;
        c.resample_policy = self.resample_policy;
        c.rwm_sigma = self.rwm_sigma;
        c.validate()?;
        Ok(c)
    }

    pub fn bdl_config(&self, variant: RateVariant) -> Result<BdlConfig> {
        let mut c = BdlConfig::new(self.n_particles, self.n_iterations, self.gamma, variant)?;
        c.kde_bandwidth = self.bandwidth();
        c.validate()?;
        Ok(c)
    }
}

fn standard_normal_preset(target: &TargetPreset) -> TargetPreset {
    let d = target.build().map(|t| t.dim()).unwrap_or(1);
    if d == 1 {
        TargetPreset::Gauss1d { mean: 0.0, variance: 1.0 }
    } else {
        TargetPreset::IsoGauss {
            variance: 1.0,
            mean: vec![0.0; d],
        }
    }
}

/// All problems found in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const SECTIONS: [(&str, &[&str]); 3] = [
    ("experiment", &["sampler", "target", "mu0", "seed", "replicates", "output"]),
    (
        "sampler",
        &[
            "n_particles",
            "n_iterations",
            "gamma",
            "schedule",
            "resampling",
            "resample_policy",
            "rwm_sigma",
            "kde_bandwidth",
        ],
    ),
    (
        "metrics",
        &["cadence", "threshold", "mmd_form", "reference_size", "reference_seed", "timing"],
    ),
];

struct Reader<'a> {
    root: &'a Table,
    errs: Vec<String>,
}

impl<'a> Reader<'a> {
    fn get(&self, section: &str, key: &str) -> Option<&'a Value> {
        self.root.get(section).and_then(Value::as_table).and_then(|t| t.get(key))
    }

    fn string(&mut self, section: &str, key: &str) -> Option<&'a str> {
        let v = self.get(section, key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.errs.push(format!("{section}.{key}: expected a quoted string, got {v}"));
                None
            }
        }
    }

    fn parsed<T: FromStr<Err = String>>(&mut self, section: &str, key: &str) -> Option<T> {
        let s = self.string(section, key)?;
        match s.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errs.push(format!("{section}.{key}: {e}"));
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str) -> Option<f64> {
        let v = self.get(section, key)?;
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.errs.push(format!("{section}.{key}: expected a number, got {v}"));
                None
            }
        }
    }

    fn count(&mut self, section: &str, key: &str) -> Option<u64> {
        let v = self.get(section, key)?;
        match v.as_integer() {
            Some(i) if i >= 0 => Some(i as u64),
            Some(i) => {
                self.errs.push(format!("{section}.{key}: must be nonnegative, got {i}"));
                None
            }
            None => {
                self.errs.push(format!("{section}.{key}: expected an integer, got {v}"));
                None
            }
        }
    }
}

/// Parses and validates a TOML experiment description, reporting every problem found.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, ConfigErrors> {
    let root: Table = toml::from_str(text).map_err(|e| ConfigErrors(vec![format!("malformed config: {e}")]))?;
    let mut r = Reader { root: &root, errs: Vec::new() };

    for (name, value) in &root {
        match SECTIONS.iter().find(|(s, _)| s == name) {
            None => r.errs.push(format!("unknown section `{name}`")),
            Some((_, keys)) => match value.as_table() {
                None => r.errs.push(format!("`{name}` must be a section")),
                Some(t) => {
                    for k in t.keys().filter(|k| !keys.contains(&k.as_str())) {
                        r.errs.push(format!("{name}.{k}: unknown key"));
                    }
                }
            },
        }
    }

    let sampler = r.parsed::<SamplerKind>("experiment", "sampler");
    if r.get("experiment", "sampler").is_none() {
        r.errs.push("experiment.sampler: required".into());
    }
    let target = r.parsed::<TargetPreset>("experiment", "target");
    if r.get("experiment", "target").is_none() {
        r.errs.push("experiment.target: required".into());
    }
    let mu0 = r.parsed::<TargetPreset>("experiment", "mu0");
    let seed = r.count("experiment", "seed");
    let replicates = r.count("experiment", "replicates");
    let output = r.string("experiment", "output").map(PathBuf::from);
    let n_particles = r.count("sampler", "n_particles");
    let n_iterations = r.count("sampler", "n_iterations");
    let gamma = r.float("sampler", "gamma");
    let schedule = r.parsed::<TemperingSchedule>("sampler", "schedule");
    let resampling = r.parsed::<Resampling>("sampler", "resampling");
    let resample_policy = r.parsed::<ResamplePolicy>("sampler", "resample_policy");
    let rwm_sigma = r.float("sampler", "rwm_sigma");
    let kde_bandwidth = r.float("sampler", "kde_bandwidth");
    let cadence = r.count("metrics", "cadence");
    let threshold = r.float("metrics", "threshold");
    let mmd_form = r.parsed::<MmdForm>("metrics", "mmd_form");
    let reference_size = r.count("metrics", "reference_size");
    let reference_seed = r.count("metrics", "reference_seed");
    let timing = r.parsed::<Timing>("metrics", "timing");

    let (Some(sampler), Some(target)) = (sampler, target) else {
        return Err(ConfigErrors(r.errs));
    };
    let mut c = ExperimentConfig::new(sampler, target);
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = $field { c.$field = v; } )* };
    }
    set!(mu0, seed, gamma, schedule, resampling, resample_policy, rwm_sigma, threshold, mmd_form, timing, reference_seed);
    macro_rules! set_usize {
        ($($field:ident),*) => { $( if let Some(v) = $field { c.$field = v as usize; } )* };
    }
    set_usize!(replicates, n_particles, n_iterations, cadence, reference_size);
    c.output = output;
    c.kde_bandwidth = kde_bandwidth;
    c.check_into(&mut r.errs);
    if r.errs.is_empty() {
        Ok(c)
    } else {
        Err(ConfigErrors(r.errs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("[experiment]\nsampler = \"ula\"\ntarget = \"gauss1d(0, 1)\"\n").unwrap();
        assert_eq!(c, ExperimentConfig::new(SamplerKind::Smc(Algorithm::Ula), TargetPreset::Gauss1d { mean: 0.0, variance: 1.0 }));
        assert_eq!(c.mu0, TargetPreset::Gauss1d { mean: 0.0, variance: 1.0 });
        assert_eq!((c.n_particles, c.n_iterations, c.replicates, c.cadence), (500, 1000, 10, 10));
    }

    #[test]
    fn every_error_is_reported() {
        let text = "[experiment]\nsampler = \"ula\"\ntarget = \"gauss1d(0, 1)\"\nreplicates = 0\n\
                    [sampler]\ngamma = -0.1\nbogus = 1\n[metrics]\ncadence = 0\n";
        let errs = parse_config(text).unwrap_err().0;
        assert!(errs.iter().any(|e| e.starts_with("sampler.gamma")), "{errs:?}");
        assert!(errs.iter().any(|e| e.starts_with("experiment.replicates")));
        assert!(errs.iter().any(|e| e.starts_with("metrics.cadence")));
        assert!(errs.iter().any(|e| e.contains("bogus")));
    }

    #[test]
    fn unknown_names_and_schedule_mismatches() {
        let errs = parse_config("[experiment]\nsampler = \"hmc\"\ntarget = \"banana\"\n").unwrap_err().0;
        assert_eq!(errs.len(), 2, "{errs:?}");
        let errs = parse_config(
            "[experiment]\nsampler = \"tempered_ula\"\ntarget = \"bimodal(3)\"\n[sampler]\nschedule = \"linear_horizon\"\n",
        )
        .unwrap_err()
        .0;
        assert!(errs[0].contains("horizon"), "{errs:?}");
        let errs = parse_config(
            "[experiment]\nsampler = \"smc_wfr\"\ntarget = \"bimodal(3)\"\n[sampler]\nschedule = \"exponential(0.1)\"\n",
        )
        .unwrap_err()
        .0;
        assert!(errs[0].contains("tempered variant"), "{errs:?}");
    }

    #[test]
    fn mu0_dimension_must_match() {
        let errs = parse_config("[experiment]\nsampler = \"ula\"\ntarget = \"four_mode\"\nmu0 = \"gauss1d(0, 1)\"\n")
            .unwrap_err()
            .0;
        assert!(errs[0].contains("dimension"), "{errs:?}");
    }

    #[test]
    fn sampler_names_round_trip() {
        for k in SamplerKind::ALL {
            assert_eq!(k.to_string().parse::<SamplerKind>().unwrap(), k);
        }
    }
}
