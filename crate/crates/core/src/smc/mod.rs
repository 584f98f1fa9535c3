//! Sequential Monte Carlo samplers built on the propose / reweight / resample skeleton.

pub mod kernels;
pub mod resample;
mod samplers;
pub mod weights;

pub use crate::oracle::mirror_descent_gaussian;
pub use kernels::{
    draw_noise, metropolis_acceptance, rwm_step, tempered_ula_step, tempered_ula_step_with_noise, ula_step,
    ula_step_with_noise,
};
pub use resample::{resample, resample_indices, Resampling};
pub use samplers::{
    run, run_smc_wfr, run_tempered_smc_wfr, run_tempering_smc, run_ula_baseline, run_unit_fr_smc, Algorithm,
    ResamplePolicy, SamplerConfig, Trajectory,
};
pub use weights::{fr_log_weights, tempered_wfr_log_weight, tempering_log_weights, wfr_log_weight};
