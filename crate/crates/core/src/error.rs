use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NotSquare { rows: usize, row: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("column {column} sums to {sum}, outside tolerance {tol} of 1")]
    ColumnSumOutOfTolerance { column: usize, sum: f64, tol: f64 },

    #[error("column {column} has no counts and smoothing is zero")]
    EmptyColumnWithoutSmoothing { column: usize },

    #[error("probability vector is invalid: {0}")]
    InvalidProbVector(String),

    #[error("label {label} out of bounds for {label_count} labels")]
    LabelOutOfBounds { label: usize, label_count: usize },

    #[error("label count must be at least {min}, got {got}")]
    TooFewLabels { min: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("candidate label {0} is already in the set")]
    CandidateAlreadyInSet(usize),

    #[error("operation requires a nonempty set")]
    EmptySet,

    #[error("brute force over {label_count} labels exceeds the limit of {max}")]
    LabelCountExceedsBruteForceLimit { label_count: usize, max: usize },

    #[error("calibration set is empty")]
    EmptyCalibration,

    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("length mismatch: {left} sets vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("insufficient calibration data: {0}")]
    InsufficientCalibrationData(String),

    #[error("invalid calibrator: {0}")]
    InvalidCalibrator(String),

    #[error("set is already a clique")]
    AlreadyClique,

    #[error("graph with {n} vertices exceeds the brute-force cap of {cap}")]
    GraphTooLarge { n: usize, cap: usize },

    #[error("self loop on vertex {0}")]
    SelfLoopRejected(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdgeRejected(usize, usize),

    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("{classes} classes do not fit on a {dims}-dimensional hypercube")]
    TooManyClassesForHypercube { classes: usize, dims: usize },

    #[error("training diverged at epoch {epoch} (loss {loss}); lower the learning rate")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("split sizes sum to {sizes}, but there are {records} records")]
    SizeMismatch { sizes: usize, records: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("{path}: row {row}: expected {expected} fields, found {found}")]
    ArityMismatch {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: row {row}: scores sum to {sum}")]
    ScoreSumOutOfTolerance { path: PathBuf, row: usize, sum: f64 },

    #[error("{path}: line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("dataset has no human predictions to estimate a confusion matrix from")]
    MissingHumanPredictions,

    #[error("invariant audit failed: {0}")]
    InvariantAudit(String),

    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv failure on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
