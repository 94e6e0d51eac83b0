use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("document `{0}` has empty text")]
    EmptyText(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Training data that cannot support the requested model, e.g. a binary
    /// target with only one class present.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("non-finite value in {stage} at epoch {epoch}")]
    NonFinite { stage: String, epoch: usize },

    #[error("configuration invalid:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("evaluation mismatch: {0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::DuplicateId(_)
            | Error::UnknownLabel(_)
            | Error::EmptyText(_)
            | Error::ModelFormat(_) => 3,
            Error::Degenerate(_) | Error::NonFinite { .. } => 4,
            Error::Mismatch(_) => 5,
        }
    }
}
