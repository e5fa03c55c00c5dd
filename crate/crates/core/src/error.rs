use std::path::PathBuf;

use thiserror::Error;

use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::regressor::{ModelFileError, RegressorError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Problems found while reading one of the newline-delimited input files.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}:{line}: malformed record: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}:{line}: invalid `{field}`: {message}", path.display())]
    InvalidField {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },
    #[error("{}:{line}: duplicate id `{id}`", path.display())]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("id `{id}` is missing from {what}")]
    MissingId { id: String, what: String },
}

impl DataError {
    pub fn line(&self) -> Option<usize> {
        match self {
            DataError::Malformed { line, .. }
            | DataError::InvalidField { line, .. }
            | DataError::DuplicateId { line, .. } => Some(*line),
            DataError::MissingId { .. } => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this failure: 2 for data problems, 3 for numeric ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Regressor(RegressorError::NonFiniteLoss { .. }) => 3,
            Error::Eval(EvalError::NonFinitePrediction { .. }) => 3,
            _ => 2,
        }
    }
}
