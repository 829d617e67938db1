use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by matrix construction, approximation pipelines, and
/// verification helpers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("data length {got} does not match {rows}x{cols} = {}", rows * cols)]
    DataLength { rows: usize, cols: usize, got: usize },

    #[error("non-finite entry {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("matrix shape {rows}x{cols} is empty; rows and cols must both be at least 1")]
    EmptyShape { rows: usize, cols: usize },

    #[error("{op}: dimension mismatch between {left_rows}x{left_cols} and {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error(
        "matrix must be symmetric within {tol:e}: |K[{row},{col}] - K[{col},{row}]| = {deviation:e}"
    )]
    NotSymmetric {
        row: usize,
        col: usize,
        deviation: f64,
        tol: f64,
    },

    #[error("landmark count must be at least 1")]
    ZeroLandmarks,

    #[error("landmark count {m} exceeds row count {n}; reduce m to at most {n}")]
    TooManyLandmarks { m: usize, n: usize },

    #[error("index {index} out of range for size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate column index {index}")]
    DuplicateIndex { index: usize },

    #[error("cannot select {requested} columns from a matrix with {available}")]
    TooManyColumns { requested: usize, available: usize },

    #[error("need at least {needed} columns, got {got}")]
    InsufficientColumns { needed: usize, got: usize },

    #[error(
        "pseudoinverse iteration diverged: residual grew for {growths} consecutive iterations, \
         last residual {residual:e} at iteration {iteration}"
    )]
    PinvDiverged {
        iteration: usize,
        residual: f64,
        growths: usize,
    },

    #[error("max_iters must be at least 1")]
    ZeroIterations,

    #[error("invalid flat-tail spectrum: {reason}")]
    InvalidFlatTail { reason: String },

    #[error("n = {n} exceeds the materialization threshold {limit}")]
    DeskScaleExceeded { n: usize, limit: usize },

    #[error("invalid argument: {reason}")]
    InvalidArgument { reason: String },
}
