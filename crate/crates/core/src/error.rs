use std::path::PathBuf;

use aggrolab_numerics::NumericsError;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, row {row}: {reason}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        reason: String,
    },
    #[error("{path}, row {row}: unknown label `{label}`")]
    UnknownLabel {
        path: PathBuf,
        row: usize,
        label: String,
    },
    #[error("document `{0}` has no label")]
    Unlabeled(String),
    #[error("empty_document: `{0}` has no tokens")]
    EmptyDocument(String),
    #[error("{file}: {reason}")]
    Resource { file: String, reason: String },
    #[error("{path}: expected {expected}-dimensional vectors, line {line} has {got}")]
    EmbeddingDim {
        path: PathBuf,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("label schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Divergence { epoch: usize, batch: usize },
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        CoreError::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input or configuration rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        match self {
            CoreError::Io { .. } | CoreError::Divergence { .. } => false,
            CoreError::Numerics(e) => matches!(e, NumericsError::WeightsFormat { .. }),
            _ => true,
        }
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
