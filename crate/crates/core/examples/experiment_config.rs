//! Parse a config, run a few replicates and write the CSVs to a temporary directory.
//!
//! cargo run --release --example experiment_config

use wfr_smc::harness::{parse_config, run_experiment};

const CONFIG: &str = r#"
[experiment]
sampler = "tempered_smc_wfr"
target = "bimodal(3)"
replicates = 4

[sampler]
n_particles = 300
n_iterations = 100
gamma = 0.1
schedule = "optimal_one_over"

[metrics]
cadence = 5
threshold = 0.01
reference_size = 2000
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = parse_config(CONFIG)?;
    let dir = std::env::temp_dir().join("wfr-smc-example");
    config.output = Some(dir.clone());
    let summary = run_experiment(&config)?;
    let mmd = summary.aggregate(|r| r.mmd);
    let its = summary.iterations_to_threshold();
    println!("{}: final mmd^2 {:.4} +- {:.4}", summary.label, mmd.mean, mmd.stderr);
    println!("mmd^2 < {} after {:.0} +- {:.0} iterations", summary.threshold, its.mean, its.stderr);
    let mut files = std::fs::read_dir(&dir)?.map(|e| e.map(|e| e.path())).collect::<Result<Vec<_>, _>>()?;
    files.sort();
    for f in files {
        println!("wrote {}", f.display());
    }
    println!("{}", std::fs::read_to_string(dir.join("summary.csv"))?);
    Ok(())
}
