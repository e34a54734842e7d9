use std::path::PathBuf;

use thiserror::Error;

use crate::numkit::NumError;

#[derive(Debug, Error)]
pub enum ClimError {
    #[error(transparent)]
    Numeric(#[from] NumError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid missing scenario: {0}")]
    Scenario(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset has no ground-truth labels")]
    MissingLabels,
    #[error("update {stage} failed at iteration {iteration}: {source}")]
    Update {
        stage: &'static str,
        iteration: usize,
        #[source]
        source: Box<ClimError>,
    },
}

impl ClimError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ClimError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        ClimError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True when the failure comes from a numeric kernel rather than input handling.
    pub fn is_numeric(&self) -> bool {
        match self {
            ClimError::Numeric(_) => true,
            ClimError::Update { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T, E = ClimError> = std::result::Result<T, E>;
