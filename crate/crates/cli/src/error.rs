use std::path::PathBuf;

use dlcz_repeater::chain::SimError;
use dlcz_repeater::experiment::ExperimentError;
use dlcz_repeater::fit::FitError;
use dlcz_repeater::rate::RateError;
use dlcz_repeater::sweep::SweepError;
use thiserror::Error;

/// Failures of a command, each tied to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// Unreadable configuration or input file.
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    /// Well-formed input whose values are outside the model's domain.
    #[error("{0}")]
    Domain(String),
    /// The run finished but its data are dominated by timeouts or empty.
    #[error("{0}")]
    Starved(String),
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Starved(_) => 4,
            CliError::NotConverged(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Param(p) => CliError::Domain(p.to_string()),
            stalled @ SimError::Stalled { .. } => CliError::Starved(stalled.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::NoHeralds { .. } => CliError::Starved(e.to_string()),
            ExperimentError::Fit(f) => f.into(),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::UnknownParameter(_) => CliError::Usage(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}
