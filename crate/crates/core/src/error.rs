use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("column not found: {0}")]
    ColumnNotFound(String),
    #[error("parse error at row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("fewer than 2 usable rows ({0} found)")]
    TooFewRows(usize),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("{segment} segment too short: {len} rows < required minimum {min}")]
    SegmentTooShort {
        segment: &'static str,
        len: usize,
        min: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("edge count {edges} exceeds the {max} available ordered pairs")]
    TooManyEdges { edges: usize, max: usize },
    #[error("non-finite value at node {node}, time {time}")]
    NonFinite { node: usize, time: usize },
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("EM failure: {0}")]
    EmFailure(String),
    #[error("non-finite training loss for target {target} at epoch {epoch}")]
    NonFiniteLoss { target: usize, epoch: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("cannot substitute target {0} into its own residuals")]
    SelfSubstitution(usize),
    #[error("knockoff intervention requires a fitted knockoff model")]
    MissingKnockoffModel,
    #[error("window scheme yields {got} windows, at least {min} required")]
    TooFewWindows { got: usize, min: usize },
    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),
    #[error("empty sample")]
    EmptySample,
    #[error("model file error: {0}")]
    ModelFile(String),
    #[error("json error: {0}")]
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
