//! Configuration-driven experiment runner: TOML configs in, versioned CSVs out.

mod compare;
mod config;
mod experiment;
mod oracle_table;

pub use compare::{compare_flows, ordering_report, CompareReport, CompareRow, OrderingCheck};
pub use config::{
    parse_config, ConfigErrors, ExperimentConfig, SamplerKind, Timing, DEFAULT_REFERENCE_SEED, DEFAULT_REPLICATES,
    PAPER_REPLICATES,
};
pub use experiment::{
    build_evaluator, run_experiment, run_replicate, run_with_evaluator, version_header, Aggregate, ReplicateResult,
    ReplicateRun, RunSummary,
};
pub use oracle_table::{gaussian_state, oracle_table, parse_grid, write_oracle_csv};
