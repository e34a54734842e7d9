//! Command-line driver for multi-view feature selection experiments.
//!
//! The binary is a thin wrapper; everything it does is reachable from here so tests
//! can run whole pipelines in-process.

pub mod commands;
pub mod config;

pub use commands::{DiagnoseRecord, EvalRecord, Experiment, FitOptions, MethodSummary, PartSummary, SNAPSHOT};
pub use config::{DataSource, EvalSection, ExperimentConfig, FitSection};

use climfs::ClimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Run(#[from] ClimError),
    #[error("not converged: {0}")]
    NotConverged(String),
}

impl CliError {
    /// 2 for bad input, 3 for numeric failures, 4 for non-convergence under `--strict`.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(e) if e.is_numeric() => 3,
            CliError::NotConverged(_) => 4,
            CliError::Config(_) | CliError::Io(_) | CliError::Run(_) => 2,
        }
    }
}
