use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must have between 1 and 4 axes, got p = {0}")]
    BadDimension(usize),
    #[error("expected {expected} entries for {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("period along axis {axis} must be positive and finite, got {value}")]
    NonPositivePeriod { axis: usize, value: f64 },
    #[error("resolution along axis {axis} must be even, got {value}")]
    OddResolution { axis: usize, value: usize },
    #[error("resolution along axis {axis} must be at least 4, got {value}")]
    ResolutionTooSmall { axis: usize, value: usize },
    #[error("index {index:?} out of bounds for resolutions {resolutions:?}")]
    IndexOutOfBounds {
        index: Vec<usize>,
        resolutions: Vec<usize>,
    },
    #[error("fields or operators live on different grids")]
    GridMismatch,
    #[error("component count mismatch: expected n = {expected}, got {got}")]
    ComponentMismatch { expected: usize, got: usize },
    #[error("axis {axis} out of range for p = {p}")]
    BadAxis { axis: usize, p: usize },
    #[error("frequency {freq:?} is not resolvable on resolutions {resolutions:?}")]
    BeyondNyquist {
        freq: Vec<i64>,
        resolutions: Vec<usize>,
    },
    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("potential does not provide a Hessian")]
    HessianUnavailable,
    #[error("dense system of size {size} exceeds the cap of {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error(
        "stationary-mean and coercivity conditions disagree for a strictly convex potential: {0}"
    )]
    Consistency(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed field file {path}: {reason}")]
    FieldFormat { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
