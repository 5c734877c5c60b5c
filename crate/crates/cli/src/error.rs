use std::path::PathBuf;

use minmax_hj::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("hypothesis check failed: {}", .failures.join("; "))]
    Hypothesis { failures: Vec<String> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("run directory {} is locked by another process", .0.display())]
    Locked(PathBuf),

    #[error("i/o error on {}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Hypothesis { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Config(_) | CliError::MissingInput(_) | CliError::Locked(_) | CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let text = e.to_string();
        match e {
            CoreError::OrderingViolation { .. }
            | CoreError::Convexity(_)
            | CoreError::UnstablePair { .. }
            | CoreError::StrictnessUnreachable { .. } => CliError::Hypothesis { failures: vec![text] },
            CoreError::MonotonicityViolation(_)
            | CoreError::NoConvergence { .. }
            | CoreError::Cfl(_)
            | CoreError::UnderResolved(_)
            | CoreError::Estimate { .. }
            | CoreError::BoxTooSmall { .. }
            | CoreError::NonSeparable(_) => CliError::Numerical(text),
            CoreError::Unverified
            | CoreError::LengthMismatch { .. }
            | CoreError::Empty
            | CoreError::InvalidLevel { .. }
            | CoreError::InvalidParameter(_)
            | CoreError::Dimension { .. }
            | CoreError::DegenerateGrid { .. }
            | CoreError::GridMismatch(_) => CliError::Config(text),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
