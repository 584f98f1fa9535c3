use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::oracle::{evolve, gaussian_kl, FlowKind, GaussianState};
use crate::schedule::TemperingSchedule;
use crate::targets::{TargetModel, TargetPreset};

use super::experiment::version_header;

/// Parses `start:stop:count` (inclusive, evenly spaced) or a comma-separated list of times.
pub fn parse_grid(text: &str) -> std::result::Result<Vec<f64>, String> {
    let text = text.trim();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", s.trim()));
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("grid `{text}` must look like start:stop:count"));
        };
        let (a, b) = (num(a)?, num(b)?);
        let n: usize = n.trim().parse().map_err(|_| format!("grid count `{}` is not an integer", n.trim()))?;
        if n < 2 {
            return Err("grid count must be at least 2".into());
        }
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    } else {
        text.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?
    };
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(format!("grid `{text}` must be nonnegative and nondecreasing"));
    }
    Ok(grid)
}

/// Gaussian state of a preset, or an error for mixtures.
pub fn gaussian_state(preset: &TargetPreset) -> Result<GaussianState> {
    match preset.build()? {
        TargetModel::Gaussian(g) => Ok(GaussianState::from_target(&g)),
        TargetModel::Mixture(_) => Err(Error::UnsupportedTarget(format!(
            "moment flows need a Gaussian, `{preset}` is a mixture"
        ))),
    }
}

/// One row per grid time: the state and `KL(state || pi)`.
pub fn oracle_table(
    kind: FlowKind,
    mu0: &GaussianState,
    pi: &GaussianState,
    schedule: Option<&TemperingSchedule>,
    grid: &[f64],
) -> Result<Vec<(GaussianState, f64)>> {
    if kind.is_tempered() && schedule.is_none() {
        return Err(invalid("schedule", format!("the {kind} flow needs a schedule")));
    }
    evolve(kind, mu0, pi, schedule, grid)?
        .into_iter()
        .map(|s| gaussian_kl(&s, pi).map(|kl| (s, kl)))
        .collect()
}

/// Writes the table as CSV: `t, m_1.., c_11.., kl`.
pub fn write_oracle_csv<W: Write>(mut out: W, rows: &[(GaussianState, f64)]) -> std::io::Result<()> {
    writeln!(out, "{}", version_header())?;
    let d = rows.first().map_or(1, |(s, _)| s.dim());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut head = vec!["t".to_string()];
    head.extend((1..=d).map(|i| format!("m_{i}")));
    for i in 1..=d {
        head.extend((1..=d).map(|j| format!("c_{i}{j}")));
    }
    head.push("kl".into());
    w.write_record(&head)?;
    for (s, kl) in rows {
        let mut row = vec![format!("{}", s.time)];
        row.extend(s.mean.iter().chain(&s.cov).map(|v| format!("{v:.12e}")));
        row.push(format!("{kl:.12e}"));
        w.write_record(&row)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0, 0.5,2").unwrap(), vec![0.0, 0.5, 2.0]);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn table_ends_near_target() {
        let mu0 = GaussianState::univariate(0.0, 1.0).unwrap();
        let pi = GaussianState::univariate(1.0, 5.0).unwrap();
        let rows = oracle_table(FlowKind::WFR, &mu0, &pi, None, &[0.0, 20.0]).unwrap();
        assert!(rows[0].1 > 0.1 && rows[1].1 < 1e-9);
        let mut buf = Vec::new();
        write_oracle_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# wfr-smc v") && text.lines().nth(1) == Some("t,m_1,c_11,kl"));
    }

    #[test]
    fn mixtures_are_rejected() {
        assert!(gaussian_state(&TargetPreset::Bimodal { separation: 2.0 }).is_err());
    }
}
