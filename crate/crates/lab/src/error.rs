use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] gle_core::Error),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("path {path}, sample {index}: price {value} is not positive")]
    Price {
        path: usize,
        index: usize,
        value: f64,
    },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    /// 2 input, 3 capability, 4 accuracy or convergence.
    pub fn exit_code(&self) -> i32 {
        use gle_core::Error as E;
        match self {
            LabError::Core(E::Capability(_) | E::Positivity { .. }) => 3,
            LabError::Core(E::Solver { .. } | E::Accuracy { .. } | E::Stability { .. }) => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }
}
