use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SdamiError>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data, files, or arguments.
    Data,
    /// A numerical routine failed (non-finite values, degenerate geometry).
    Numerical,
}

#[derive(Debug, Error)]
pub enum SdamiError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis block {group} is rank deficient (column {column} has no variation left after orthogonalization)")]
    RankDeficient { group: String, column: usize },

    #[error(
        "basis block {group} needs more samples than columns (n = {n}, block dimension = {m})"
    )]
    TooFewSamples { group: String, n: usize, m: usize },

    #[error("unknown group {0}")]
    UnknownGroup(String),

    #[error("group {0} is not active in the model")]
    InactiveGroup(String),

    #[error("invalid simulation case {0} (expected 1..=6)")]
    InvalidCase(u32),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: String },

    #[error("non-numeric value {value:?} at row {row}, column {column}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("duplicate column name {0:?} in header")]
    DuplicateHeader(String),

    #[error("column {0:?} not found")]
    MissingColumn(String),

    #[error("fold of size {fold_size} is too small for blocks of dimension {max_block}; use fewer folds")]
    FoldTooSmall { fold_size: usize, max_block: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate}): loss = {loss}")]
    Diverged {
        epoch: usize,
        learning_rate: f64,
        loss: f64,
    },

    #[error("unsupported model schema version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<SdamiError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SdamiError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            SdamiError::RankDeficient { .. }
            | SdamiError::NonFinite(_)
            | SdamiError::Diverged { .. } => ErrorKind::Numerical,
            SdamiError::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> SdamiError {
        SdamiError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> SdamiError {
        SdamiError::Io {
            path: path.into(),
            source,
        }
    }
}
