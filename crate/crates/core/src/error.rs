use std::path::PathBuf;

/// Errors raised by the training engine, dataset loaders and probes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid optimizer config: {0}")]
    InvalidOptim(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("label {label} outside [0, {n_classes})")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cosine similarity undefined for a zero-norm vector")]
    ZeroNorm,

    #[error("activation ratio undefined: all non-tracked activations are zero")]
    UndefinedRatio,

    #[error("layer {layer} out of range (network has {n_hidden} hidden layers)")]
    LayerOutOfRange { layer: usize, n_hidden: usize },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
