use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png decode error: {0}")]
    Decode(String),

    #[error("png encode error: {0}")]
    Encode(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not orthogonal: residual {residual:e} exceeds {tolerance:e}")]
    NotOrthogonal { residual: f64, tolerance: f64 },

    #[error("ambiguous dominance: margin {margin:e} is within the tie tolerance")]
    Ambiguous { margin: f64 },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("unknown component '{0}'")]
    UnknownComponent(String),

    #[error("training diverged at step {step}: {what} is {value}")]
    Diverged {
        step: usize,
        what: &'static str,
        value: f64,
    },

    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
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
