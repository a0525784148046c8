use std::path::PathBuf;

/// Errors produced by the scoring engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("unsupported manifest format_version {found} (expected {expected})")]
    UnsupportedVersion { found: u64, expected: u64 },

    #[error("tensor `{tensor}`: missing payload file {path}")]
    MissingTensorFile { tensor: String, path: PathBuf },

    #[error(
        "tensor `{tensor}`: shape {shape:?} needs {expected} bytes but payload holds {actual}"
    )]
    ShapeMismatch {
        tensor: String,
        shape: Vec<usize>,
        expected: u64,
        actual: u64,
    },

    #[error("tensor `{tensor}`: non-finite value at element {offset} (byte offset {byte_offset})")]
    NonFinite {
        tensor: String,
        offset: usize,
        byte_offset: usize,
    },

    #[error("tensor `labels`: value {value} at element {offset} outside [0, {classes})")]
    LabelOutOfRange {
        offset: usize,
        value: i64,
        classes: usize,
    },

    #[error("invalid bundle: {0}")]
    InvalidBundle(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least {needed} items, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("need at least 2 active classes after dropping empty clusters, got {active}")]
    TooFewActiveClasses { active: usize },

    #[error("covariance is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("labels are required for {0}")]
    MissingLabels(&'static str),

    #[error("rotation tensors are required for the rotation score")]
    MissingRotation,

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
