use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point has non-positive depth")]
    NonPositiveDepth,
    #[error("implicit row projection did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("scene contains no points")]
    EmptyScene,
    #[error("degenerate polynomial system: {0}")]
    DegenerateSystem(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("rows are inconsistent with a pure x-translation (|v + v'| = {0:e})")]
    InconsistentRows(f64),
    #[error("correspondence lies on simultaneous rows")]
    DegenerateRows,
    #[error("linear system is rank deficient (null space dimension {0})")]
    RankDeficient(usize),
    #[error("no sign choice makes all depths positive")]
    CheiralityFailure,
    #[error("translation gauge t_x + t_y = 1 is degenerate for this solution")]
    GaugeDegenerate,
    #[error("need at least {needed} correspondences, got {got}")]
    InsufficientCorrespondences { needed: usize, got: usize },
    #[error("no model found: every sample was degenerate")]
    NoModelFound,
    #[error("no correspondences left after filtering")]
    EmptyAfterFiltering,
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("rows are too close in time to triangulate")]
    DegenerateBaseline,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("file is empty")]
    EmptyFile,
    #[error("bad magic header")]
    BadMagic,
    #[error("truncated data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
