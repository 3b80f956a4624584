use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("duplicate doc_id {doc_id:?} on lines {first_line} and {second_line}")]
    DuplicateDocId {
        doc_id: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bad magic: expected \"RMV1\"")]
    BadMagic,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("truncated vector payload: {0}")]
    Truncated(String),

    #[error("{0} unexpected trailing bytes after vector payload")]
    TrailingBytes(usize),

    #[error("vector {id:?} is not unit-norm (norm {norm})")]
    NotUnitNorm { id: String, norm: f32 },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("cannot build an index over zero vectors")]
    EmptyIndex,

    #[error("pool of {pool} hits is smaller than the required {required}")]
    PoolTooSmall { pool: usize, required: usize },

    #[error("rank {rank} of query {query_id:?} is not present in the hit list")]
    UnresolvableRank { query_id: String, rank: usize },

    #[error("unknown candidate {0:?}")]
    UnknownCandidate(String),

    #[error("unknown label {0:?}")]
    InvalidLabel(String),

    #[error("hit {0:?} has no percentile rank")]
    MissingPercentile(String),

    #[error("unknown chunk {0:?}")]
    UnknownChunk(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error was caused by bad input data rather than a bug or
    /// environment failure.
    pub fn is_data_error(&self) -> bool {
        use std::io::ErrorKind;
        match self {
            Error::Io { source, .. } => matches!(
                source.kind(),
                ErrorKind::NotFound | ErrorKind::InvalidData | ErrorKind::UnexpectedEof
            ),
            Error::Csv(_) => false,
            Error::Stage { source, .. } => source.is_data_error(),
            _ => true,
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_owned(),
            source: Box::new(self),
        }
    }
}
