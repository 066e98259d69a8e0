//! Batch front end: configuration, execution and report emission.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use report::{emit_report, load_record};
pub use runner::{run, run_with_threads, threads_from_env, CheckResult, RunError, RunRecord};
