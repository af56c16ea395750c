//! Configuration, orchestration and CSV output for sparse SpiderBoost experiments.

pub mod check;
pub mod config;
pub mod presets;
pub mod runner;

pub use config::{parse_config, ConfigError, ExperimentSpec, Mode};
pub use runner::{aggregate, run_experiment, Outcome};
