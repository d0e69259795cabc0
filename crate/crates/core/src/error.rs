use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported version: expected {expected}, found {found}")]
    Version { expected: String, found: String },

    #[error("invalid descriptor set: {0}")]
    InvalidSet(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate labeling: no relevant and no irrelevant pairs can be formed")]
    DegenerateLabeling,

    #[error("degenerate denominator: relevant-side scatter is zero (no relevant pairs or zero weights)")]
    DegenerateDenominator,

    #[error("degenerate numerator: irrelevant-side scatter is zero (no irrelevant pairs or zero weights)")]
    DegenerateNumerator,

    #[error("zero denominator in objective for this projection")]
    ZeroDenominator,

    #[error(
        "denominator matrix is not positive definite (smallest eigenvalue {min_eig:e}); \
         increase epsilon_scale"
    )]
    NotPositiveDefinite { min_eig: f64 },

    #[error("trace-ratio iteration did not converge in {iters} iterations (last ratio {last_ratio})")]
    NoConvergence { iters: usize, last_ratio: f64 },

    #[error("empty subset: {0}")]
    EmptySubset(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
