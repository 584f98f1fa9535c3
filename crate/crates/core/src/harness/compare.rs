use std::fs;
use std::io::Write;
use std::path::Path;

use super::config::ExperimentConfig;
use super::experiment::{run_experiment, version_header, Aggregate, RunSummary};
use crate::error::{Error, Result};
use crate::schedule::TemperingSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub label: String,
    pub family: &'static str,
    pub schedule: TemperingSchedule,
    pub iterations: Aggregate,
    pub reached: usize,
    pub summary: RunSummary,
}

/// `lhs` needs no more iterations than `rhs`, up to one combined standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCheck {
    pub lhs: String,
    pub rhs: String,
    pub gap: f64,
    pub stderr: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub orderings: Vec<OrderingCheck>,
}

impl CompareReport {
    pub fn all_hold(&self) -> bool {
        self.orderings.iter().all(|o| o.holds)
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(path)?;
        writeln!(f, "{}", version_header())?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(f);
        w.write_record(["label", "iterations_mean", "iterations_stderr", "reached", "replicates"])?;
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                format!("{:.3}", r.iterations.mean),
                format!("{:.3}", r.iterations.stderr),
                r.reached.to_string(),
                r.summary.replicates.len().to_string(),
            ])?;
        }
        w.flush()
    }

    /// Human-readable table followed by the ordering checks.
    pub fn render(&self) -> String {
        let mut s = format!("{:<40} {:>12} {:>10} {:>8}\n", "sampler", "iterations", "stderr", "reached");
        for r in &self.rows {
            s += &format!(
                "{:<40} {:>12.1} {:>10.1} {:>5}/{}\n",
                r.label,
                r.iterations.mean,
                r.iterations.stderr,
                r.reached,
                r.summary.replicates.len()
            );
        }
        for o in &self.orderings {
            s += &format!(
                "{} {} <= {} (gap {:.1}, stderr {:.1})\n",
                if o.holds { "ok  " } else { "FAIL" },
                o.lhs,
                o.rhs,
                o.gap,
                o.stderr
            );
        }
        s
    }
}

fn ordering(a: &CompareRow, b: &CompareRow) -> OrderingCheck {
    let gap = a.iterations.mean - b.iterations.mean;
    let stderr = a.iterations.stderr.hypot(b.iterations.stderr);
    OrderingCheck {
        lhs: a.label.clone(),
        rhs: b.label.clone(),
        gap,
        stderr,
        holds: gap <= stderr,
    }
}

/// Builds the ordering report from already computed summaries.
///
/// Checks that the untempered run of each family is no slower than every
/// tempered run of the same family, and that the WFR family is no slower than
/// the W family under the same schedule.
pub fn ordering_report(configs: &[ExperimentConfig], summaries: Vec<RunSummary>) -> Result<CompareReport> {
    check_comparable(configs)?;
    let rows: Vec<CompareRow> = configs
        .iter()
        .zip(summaries)
        .map(|(c, s)| CompareRow {
            label: c.label(),
            family: c.sampler.family(),
            schedule: c.effective_schedule(),
            iterations: s.iterations_to_threshold(),
            reached: s.reached_threshold(),
            summary: s,
        })
        .collect();
    let mut orderings = Vec::new();
    for a in &rows {
        for b in &rows {
            if a.family == b.family && a.schedule.is_constant_one() && !b.schedule.is_constant_one() {
                orderings.push(ordering(a, b));
            }
            if a.family == "wfr" && b.family == "w" && a.schedule == b.schedule {
                orderings.push(ordering(a, b));
            }
        }
    }
    Ok(CompareReport { rows, orderings })
}

fn check_comparable(configs: &[ExperimentConfig]) -> Result<()> {
    let Some(first) = configs.first() else {
        return Err(Error::Empty("comparison configs"));
    };
    for c in &configs[1..] {
        if c.target != first.target || c.mu0 != first.mu0 || c.n_particles != first.n_particles {
            return Err(Error::Unsupported(format!(
                "configs are not comparable: `{}` uses target {}, mu0 {}, N = {} but `{}` uses target {}, mu0 {}, N = {}",
                first.label(),
                first.target,
                first.mu0,
                first.n_particles,
                c.label(),
                c.target,
                c.mu0,
                c.n_particles
            )));
        }
    }
    Ok(())
}

/// Runs every config and tabulates iterations-to-threshold with the pairwise orderings.
pub fn compare_flows(configs: &[ExperimentConfig]) -> Result<CompareReport> {
    check_comparable(configs)?;
    let summaries = configs.iter().map(run_experiment).collect::<Result<Vec<_>>>()?;
    ordering_report(configs, summaries)
}
