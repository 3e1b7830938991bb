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

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("volume data length {got} does not match dims product {expected}")]
    DataLength { expected: usize, got: usize },

    #[error("nifti {field}: {message}")]
    Nifti { field: &'static str, message: String },

    #[error("raw volume metadata: {0}")]
    RawFormat(String),

    #[error("field file parse error at byte offset {offset}: {message}")]
    FieldFormat { offset: u64, message: String },

    #[error("degenerate scale {scale:e} (must exceed 1e-8 world units)")]
    DegenerateScale { scale: f64 },

    #[error("empty field; lower background_threshold")]
    EmptyField,

    #[error("stale brick index (built for field generation {index}, field is at {field}); rebuild brick index")]
    StaleIndex { index: u64, field: u64 },

    #[error("non-finite upstream gradient at voxel {voxel}")]
    NonFiniteGradient { voxel: usize },

    #[error("non-finite loss at iteration {iteration}; last checkpoint: {}", checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()))]
    NonFiniteLoss {
        iteration: usize,
        checkpoint: Option<PathBuf>,
    },

    #[error("volume too small for SSIM window (dims {dims:?}, window {window})")]
    SsimTooSmall { dims: [usize; 3], window: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
