pub mod bdl;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod particles;
pub mod quadrature;
pub mod rng;
pub mod schedule;
pub mod smc;
pub mod targets;
pub mod weights;
