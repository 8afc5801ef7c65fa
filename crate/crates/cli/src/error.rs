use std::path::{Path, PathBuf};

use hpp_core::backtest::BacktestError;
use hpp_core::curves::CurveError;
use hpp_core::market_data::DataError;
use hpp_core::training::TrainingError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(DataError),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Pipeline(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Stable identifier printed at the start of the error line.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "E_IO",
            Self::Data(_) => "E_DATA",
            Self::Config(_) => "E_CONFIG",
            Self::Usage(_) => "E_USAGE",
            Self::Solver(_) => "E_SOLVER",
            Self::Pipeline(_) => "E_PIPELINE",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Data(_) => 2,
            Self::Config(_) | Self::Usage(_) => 3,
            Self::Solver(_) | Self::Pipeline(_) => 4,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { path, source } => Self::Io {
                path: path.into(),
                source,
            },
            other => Self::Data(other),
        }
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::Data(d) => d.into(),
            TrainingError::InvalidConfig(m) => Self::Config(m),
            TrainingError::Solver(_) | TrainingError::AuditFailed { .. } => Self::Solver(e.to_string()),
            other => Self::Pipeline(other.to_string()),
        }
    }
}

impl From<BacktestError> for CliError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::Training(t) => t.into(),
            BacktestError::InvalidConfig(m) => Self::Config(m),
            other => Self::Pipeline(other.to_string()),
        }
    }
}

impl From<CurveError> for CliError {
    fn from(e: CurveError) -> Self {
        Self::Pipeline(e.to_string())
    }
}
