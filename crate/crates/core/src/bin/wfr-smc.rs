use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use wfr_smc::harness::{
    gaussian_state, oracle_table, ordering_report, parse_config, parse_grid, run_experiment, write_oracle_csv,
    ExperimentConfig, RunSummary, PAPER_REPLICATES,
};
use wfr_smc::oracle::FlowKind;
use wfr_smc::schedule::TemperingSchedule;
use wfr_smc::targets::TargetPreset;

const EXIT_ALL_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "wfr-smc", version, about = "Run WFR / SMC sampler experiments and Gaussian flow oracles")]
struct Cli {
    /// Base seed; replicate r uses seed + r.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Output directory (overrides the config's `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use 50 replicates.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Run several configs sharing target, mu0 and N and report iteration orderings.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Tabulate the Gaussian moment flow and KL to the target.
    Oracle {
        #[arg(long)]
        flow: FlowKind,
        #[arg(long)]
        mu0: TargetPreset,
        #[arg(long)]
        pi: TargetPreset,
        /// `start:stop:count` or `t1,t2,...`
        #[arg(long)]
        grid: String,
        /// Required by the tempered flows.
        #[arg(long)]
        schedule: Option<TemperingSchedule>,
    },
}

enum Failure {
    Config(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ALL_FAILED)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Run { config } => {
            let mut c = load(config, cli)?;
            let dir = cli.out.clone().or(c.output.clone()).unwrap_or_else(|| default_dir(config));
            c.output = Some(dir.clone());
            let summary = run_experiment(&c).context("running experiment")?;
            print_summary(&summary);
            println!("wrote {}", dir.display());
            Ok(if summary.all_failed() { EXIT_ALL_FAILED } else { 0 })
        }
        Command::Compare { configs } => {
            let base = cli.out.clone().unwrap_or_else(|| PathBuf::from("out/compare"));
            let mut loaded = Vec::new();
            for path in configs {
                let mut c = load(path, cli)?;
                c.output = Some(base.join(stem(path)));
                loaded.push(c);
            }
            let summaries = loaded
                .iter()
                .map(|c| run_experiment(c).with_context(|| format!("running {}", c.label())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let any_all_failed = summaries.iter().any(RunSummary::all_failed);
            let report = ordering_report(&loaded, summaries).map_err(|e| Failure::Config(e.to_string()))?;
            print!("{}", report.render());
            let path = base.join("compare.csv");
            report.write_csv(&path).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
            Ok(if any_all_failed { EXIT_ALL_FAILED } else { 0 })
        }
        Command::Oracle {
            flow,
            mu0,
            pi,
            grid,
            schedule,
        } => {
            let grid = parse_grid(grid).map_err(|e| Failure::Config(format!("--grid: {e}")))?;
            let m0 = gaussian_state(mu0).map_err(|e| Failure::Config(format!("--mu0: {e}")))?;
            let p = gaussian_state(pi).map_err(|e| Failure::Config(format!("--pi: {e}")))?;
            let rows = oracle_table(*flow, &m0, &p, schedule.as_ref(), &grid)
                .map_err(|e| Failure::Config(format!("oracle: {e}")))?;
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).context("creating output directory")?;
                    let path = dir.join(format!("oracle_{flow}.csv"));
                    let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_oracle_csv(f, &rows).context("writing oracle table")?;
                    println!("wrote {}", path.display());
                }
                None => write_oracle_csv(std::io::stdout().lock(), &rows).context("writing oracle table")?,
            }
            Ok(0)
        }
    }
}

fn load(path: &Path, cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut c = parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if cli.paper_scale {
        c.replicates = PAPER_REPLICATES;
    }
    if let Some(r) = cli.replicates {
        c.replicates = r;
    }
    c.validate().map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(c)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned())
}

fn default_dir(config: &Path) -> PathBuf {
    PathBuf::from("out").join(stem(config))
}

fn print_summary(s: &RunSummary) {
    println!("{}: {} replicate(s), {} failed", s.label, s.replicates.len(), s.failures());
    for rep in &s.replicates {
        if let Err(e) = &rep.outcome {
            println!("  replicate {} (seed {}): {e}", rep.replicate, rep.seed);
        }
    }
    let rows: [(&str, fn(&wfr_smc::metrics::MetricReport) -> f64); 5] = [
        ("mmd", |r| r.mmd),
        ("w1_marginal_avg", |r| r.w1_marginal_avg),
        ("mse_mean", |r| r.mse_mean),
        ("mse_cov", |r| r.mse_cov),
        ("wallclock_s", |r| r.wallclock_s),
    ];
    for (name, f) in rows {
        let a = s.aggregate(f);
        println!("  {name:<16} {:.5} +- {:.5}", a.mean, a.stderr);
    }
    let it = s.iterations_to_threshold();
    println!(
        "  mmd < {} after {:.1} +- {:.1} iterations ({} of {} reached)",
        s.threshold,
        it.mean,
        it.stderr,
        s.reached_threshold(),
        s.replicates.len() - s.failures()
    );
}
