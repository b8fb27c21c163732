use thiserror::Error;

/// Errors raised while loading data, fitting models, or running inference.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-finite or unparsable value in row {row}, column `{column}`")]
    NonFiniteValue { row: usize, column: String },

    #[error("status must be 0 or 1 (row {0})")]
    NonBinaryStatus(usize),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("integration upper limit must be nonnegative, got {0}")]
    NegativeUpper(f64),

    #[error("nonzero numerator over zero denominator on interval starting at t = {0}")]
    DivisionByNonzeroOverZero(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("column {0} of W has zero spread")]
    DegenerateColumn(usize),

    #[error("invalid bandwidth: {0}")]
    InvalidBandwidth(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("expected {expected} grid values, found {found}")]
    IncompleteValues { expected: usize, found: usize },

    #[error("singular denominator matrix ({0})")]
    SingularDenominator(String),

    #[error("no events in the data")]
    NoEvents,

    #[error("assembled system is numerically singular (condition {condition:.3e}); suspect grid points {grid_points:?}")]
    SingularSystem {
        condition: f64,
        grid_points: Vec<usize>,
    },

    #[error("empty risk set at t = {0}")]
    EmptyRiskSet(f64),

    #[error("kernel-weighted second-moment matrix D(w) is singular at w = {0:?}")]
    SingularD(Vec<f64>),

    #[error("confidence bands need a scalar effect modifier, got q = {0}")]
    UnsupportedDimension(usize),

    #[error("at least 100 perturbation replicates are required, got {0}")]
    TooFewReplicates(usize),

    #[error("all event times are tied; concordance is undefined")]
    AllTimesTied,

    #[error("negative hazard offset {0}")]
    NegativeHazardOffset(f64),

    #[error("bisection did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
