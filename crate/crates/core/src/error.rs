use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation stack.
///
/// Each variant belongs to one of three families (configuration, data,
/// estimation) so that command-line front ends can map them onto stable
/// exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing required role `{0}`")]
    MissingRole(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("data error: {0}")]
    Data(String),

    #[error("duplicate observation for unit `{unit}` at wave {wave}")]
    DuplicateKey { unit: String, wave: i64 },

    #[error("cannot parse `{value}` in column `{column}` (row {row})")]
    Unparseable {
        column: String,
        row: usize,
        value: String,
    },

    #[error("missing value in column `{column}` (row {row})")]
    MissingValue { column: String, row: usize },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse error family, used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Estimation,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::MissingRole(_) => ErrorKind::Config,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Data(_)
            | Error::DuplicateKey { .. }
            | Error::Unparseable { .. }
            | Error::MissingValue { .. } => ErrorKind::Data,
            Error::Estimation(_) => ErrorKind::Estimation,
            Error::Stage { source, .. } => source.kind(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
