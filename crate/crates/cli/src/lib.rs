//! Seeded, config-driven experiment runner for `percwalk`.

pub mod config;
pub mod demos;
pub mod output;
pub mod run;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use run::{run, Artifacts, RunError};

pub const VERSION: &str = concat!("percwalk ", env!("CARGO_PKG_VERSION"));
