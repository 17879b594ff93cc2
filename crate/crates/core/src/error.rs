use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("loss became non-finite during epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("unknown class {0:?}")]
    UnknownClass(String),

    #[error("{0:?} is not in the vocabulary")]
    OutOfVocabulary(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("split leakage: id {0:?} appears in more than one split")]
    SplitOverlap(String),

    #[error("probability block {block} sums to {sum}")]
    NotStochastic { block: usize, sum: f64 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("content hash mismatch for {}: manifest has {expected}, found {found}", path.display())]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
