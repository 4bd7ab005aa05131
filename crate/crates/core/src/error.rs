use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared across the pipeline.
///
/// Variants are grouped roughly by origin: configuration and validation
/// problems (bad dimensions, fold counts, shapes) versus data and runtime
/// problems (I/O, ingestion, divergence). The CLI maps the former to exit
/// code 2 and the latter to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to ingest {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },

    #[error("class directory `{0}` contains no images")]
    EmptyClass(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid fold count: k = {k} requires 2 <= k <= n (n = {n})")]
    InvalidFoldCount { k: usize, n: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    TrainingDiverged { epoch: usize, reason: String },

    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),

    #[error("unsupported model format version {found} (this build reads version {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid arguments or configuration rather
    /// than by the data or the environment.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidDimension(_)
                | Error::InvalidFoldCount { .. }
                | Error::ShapeMismatch(_)
        )
    }
}
