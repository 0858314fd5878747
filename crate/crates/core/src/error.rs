use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector norm is at or below 1e-12")]
    ZeroVector,

    #[error("vector contains a non-finite entry")]
    NonFinite,

    #[error("{role} row {row}: vector norm is at or below 1e-12")]
    ZeroRow { role: String, row: usize },

    #[error("{role} row {row}: vector contains a non-finite entry")]
    NonFiniteRow { role: String, row: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("expected a {expected} embedding, found {found}")]
    ModalityMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("class {0} has no images")]
    EmptyClass(usize),

    #[error("{0} scores are empty")]
    EmptySide(&'static str),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("manifest is missing role `{0}`")]
    MissingRole(String),

    #[error("count mismatch: {0}")]
    CountMismatch(String),

    #[error("insufficient samples for ratio {ratio}: {reason}")]
    InsufficientSamples { ratio: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sample `{sample}`: {source}")]
    Sample {
        sample: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical check failed: {0}")]
    CheckFailed(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_sample(self, sample: &str) -> Self {
        Error::Sample {
            sample: sample.to_string(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 for configuration errors, 3 for data errors,
    /// 4 for numerical errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::ZeroVector
            | Error::NonFinite
            | Error::ZeroRow { .. }
            | Error::NonFiniteRow { .. }
            | Error::CheckFailed(_) => 4,
            Error::Sample { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
