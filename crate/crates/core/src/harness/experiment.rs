use std::fs;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, SamplerKind, Timing};
use crate::bdl::run_bdl;
use crate::error::{Error, Result};
use crate::metrics::{Evaluator, MetricReport, MmdReference};
use crate::particles::ParticleSystem;
use crate::rng::RngStream;
use crate::smc::run;
use crate::targets::Target;

const REFERENCE_STREAM: u64 = 0x5eed;

/// `# wfr-smc v<version>`, the first line of every CSV written by the harness.
pub fn version_header() -> String {
    format!("# wfr-smc v{}", env!("CARGO_PKG_VERSION"))
}

/// Metric history of one successful replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRun {
    pub history: Vec<MetricReport>,
    /// First recorded iteration whose MMD is below the threshold.
    pub iterations_to_threshold: Option<usize>,
}

impl ReplicateRun {
    pub fn final_report(&self) -> &MetricReport {
        self.history.last().expect("history holds the initial report")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    pub outcome: std::result::Result<ReplicateRun, Error>,
}

/// Sample mean and standard error over the successful replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, count: n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub threshold: f64,
    pub n_iterations: usize,
    pub replicates: Vec<ReplicateResult>,
}

impl RunSummary {
    pub fn successes(&self) -> impl Iterator<Item = &ReplicateRun> {
        self.replicates.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.replicates.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn all_failed(&self) -> bool {
        self.failures() == self.replicates.len()
    }

    /// Aggregate of a final-report field across successful replicates.
    pub fn aggregate(&self, field: impl Fn(&MetricReport) -> f64) -> Aggregate {
        let v: Vec<f64> = self.successes().map(|r| field(r.final_report())).collect();
        Aggregate::of(&v)
    }

    /// Iterations needed to reach the threshold; replicates that never reach
    /// it count as `n_iterations + 1`.
    pub fn iterations_to_threshold(&self) -> Aggregate {
        let v: Vec<f64> = self
            .successes()
            .map(|r| r.iterations_to_threshold.unwrap_or(self.n_iterations + 1) as f64)
            .collect();
        Aggregate::of(&v)
    }

    pub fn reached_threshold(&self) -> usize {
        self.successes().filter(|r| r.iterations_to_threshold.is_some()).count()
    }

    /// Writes `replicate_XXX.csv` for each successful replicate and `summary.csv`.
    pub fn write_csv(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for rep in &self.replicates {
            if let Ok(run) = &rep.outcome {
                let path = dir.join(format!("replicate_{:03}.csv", rep.replicate));
                let mut w = header_writer(&path)?;
                w.write_record(MetricReport::COLUMNS)?;
                for r in &run.history {
                    w.write_record(report_fields(r))?;
                }
                w.flush()?;
                written.push(path);
            }
        }
        let path = dir.join("summary.csv");
        let mut w = header_writer(&path)?;
        let mut head = vec!["replicate", "seed", "status"];
        head.extend(MetricReport::COLUMNS);
        head.push("iterations_to_threshold");
        w.write_record(&head)?;
        for rep in &self.replicates {
            let mut row = vec![rep.replicate.to_string(), rep.seed.to_string()];
            match &rep.outcome {
                Ok(run) => {
                    row.push("ok".into());
                    row.extend(report_fields(run.final_report()));
                    row.push(run.iterations_to_threshold.map(|i| i.to_string()).unwrap_or_default());
                }
                Err(e) => {
                    row.push(format!("failed: {e}"));
                    row.extend(std::iter::repeat_n(String::new(), MetricReport::COLUMNS.len() + 1));
                }
            }
            w.write_record(&row)?;
        }
        let fields: [fn(&MetricReport) -> f64; 7] = [
            |r| r.iteration as f64,
            |r| r.wallclock_s,
            |r| r.ess_fraction,
            |r| r.mmd,
            |r| r.w1_marginal_avg,
            |r| r.mse_mean,
            |r| r.mse_cov,
        ];
        let aggs: Vec<Aggregate> = fields.iter().map(|f| self.aggregate(f)).collect();
        let itt = self.iterations_to_threshold();
        for (name, pick) in [("mean", 0), ("stderr", 1)] {
            let get = |a: &Aggregate| if pick == 0 { a.mean } else { a.stderr };
            let mut row = vec![name.to_string(), String::new(), format!("{}/{}", aggs[0].count, self.replicates.len())];
            row.extend(aggs.iter().map(|a| fmt_f64(get(a))));
            row.push(fmt_f64(get(&itt)));
            w.write_record(&row)?;
        }
        w.flush()?;
        written.push(path);
        Ok(written)
    }
}

fn header_writer(path: &Path) -> std::io::Result<csv::Writer<fs::File>> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", version_header())?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(f))
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.9e}")
}

fn report_fields(r: &MetricReport) -> Vec<String> {
    vec![
        r.iteration.to_string(),
        format!("{:.6}", r.wallclock_s),
        fmt_f64(r.ess_fraction),
        fmt_f64(r.mmd),
        fmt_f64(r.w1_marginal_avg),
        fmt_f64(r.mse_mean),
        fmt_f64(r.mse_cov),
    ]
}

/// Builds the metric evaluator shared by every replicate of `config`.
pub fn build_evaluator(config: &ExperimentConfig) -> Result<Evaluator> {
    let pi = config.build_target()?;
    let mut rng = RngStream::new(config.reference_seed, REFERENCE_STREAM).rng();
    let points = pi.sample_exact(config.reference_size, &mut rng)?;
    let (m, c) = pi.moments();
    Evaluator::new(MmdReference::new(points, pi.dim())?, m, c, config.mmd_form)
}

/// Runs every replicate of `config` and, when `config.output` is set, writes the CSVs.
///
/// Replicate `r` uses seed `config.seed + r`. Replicates run in parallel and
/// are collected in replicate order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    if let Err(e) = config.validate() {
        return Err(Error::Unsupported(e.to_string()));
    }
    let evaluator = build_evaluator(config)?;
    let summary = run_with_evaluator(config, &evaluator)?;
    if let Some(dir) = &config.output {
        summary
            .write_csv(dir)
            .map_err(|e| Error::Unsupported(format!("writing {}: {e}", dir.display())))?;
    }
    Ok(summary)
}

/// As [`run_experiment`] with a caller-supplied evaluator and no file output.
pub fn run_with_evaluator(config: &ExperimentConfig, evaluator: &Evaluator) -> Result<RunSummary> {
    let pi = config.build_target()?;
    let mu0 = config.build_mu0()?;
    let replicates: Vec<ReplicateResult> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = config.seed.wrapping_add(r as u64);
            ReplicateResult {
                replicate: r,
                seed,
                outcome: run_replicate(config, evaluator, &mu0, &pi, seed),
            }
        })
        .collect();
    Ok(RunSummary {
        label: config.label(),
        threshold: config.threshold,
        n_iterations: config.n_iterations,
        replicates,
    })
}

/// One replicate with metrics every `cadence` iterations and at the last one.
pub fn run_replicate(
    config: &ExperimentConfig,
    evaluator: &Evaluator,
    mu0: &dyn Target,
    pi: &dyn Target,
    seed: u64,
) -> std::result::Result<ReplicateRun, Error> {
    let mut rng = RngStream::new(seed, 0).rng();
    let start = Instant::now();
    let mut history = Vec::new();
    let mut first = None;
    let mut failure = None;
    let last = config.n_iterations;
    let mut observe = |ps: &ParticleSystem| {
        if ps.iteration % config.cadence != 0 && ps.iteration != last {
            return ControlFlow::Continue(());
        }
        let clock = match config.timing {
            Timing::Wallclock => start.elapsed().as_secs_f64(),
            Timing::Off => 0.0,
        };
        match evaluator.report(ps, clock) {
            Ok(r) => {
                if first.is_none() && r.mmd < config.threshold {
                    first = Some(r.iteration);
                }
                history.push(r);
                ControlFlow::Continue(())
            }
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
        }
    };
    match config.sampler {
        SamplerKind::Smc(alg) => {
            run(alg, &config.sampler_config()?, mu0, pi, &mut rng, &mut observe)?;
        }
        SamplerKind::Bdl(variant) => {
            run_bdl(&config.bdl_config(variant)?, mu0, pi, &mut rng, &mut observe)?;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ReplicateRun {
        history,
        iterations_to_threshold: first,
    })
}
