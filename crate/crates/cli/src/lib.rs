//! Batch driver for critlab experiments: TOML configs in, JSON reports and
//! CSV tables out, plus the acceptance runner.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind, Precision};
pub use error::{CliError, Result};
pub use report::{Artifacts, Baseline, Report};
