use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("portfolio earns nonpositive wealth (x.w = {0})")]
    NonpositiveWealth(f64),
    #[error("point lies on or outside the simplex boundary")]
    BoundaryPoint,
    #[error("reparametrized Hessian is not positive definite")]
    SingularHessian,
    #[error("term index {0} out of range")]
    IndexOutOfRange(String),
    #[error("new loss has leverage {0} >= 1")]
    DegenerateLeverage(f64),
    #[error("argument {value} outside the domain of {function}")]
    DomainError { function: &'static str, value: f64 },
    #[error("certificate unavailable: M * decrement = {0} >= 1")]
    CertificateUnavailable(f64),
    #[error("iterate left the open simplex after {halvings} step halvings")]
    LeftDomain { halvings: usize },
    #[error("no convergence within {iterations} iterations (decrement {decrement:e})")]
    MaxIterations { iterations: usize, decrement: f64 },
    #[error("instance too large for the exact volumetric Hessian: {terms} terms (cap {cap})")]
    InstanceTooLarge { terms: usize, cap: usize },
    #[error("unsupported dimension d = {d}: {reason}")]
    UnsupportedDimension { d: usize, reason: &'static str },
    #[error("invalid return vector: {0}")]
    InvalidReturn(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parse error at row {row}, column {col}: {msg}")]
    ParseError { row: usize, col: usize, msg: String },
    #[error("row {row} has {got} columns, expected {expected}")]
    InconsistentWidth {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io error: {0}")]
    IoError(String),
}

impl Error {
    /// Errors caused by the caller's input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidReturn(_)
                | Error::DimensionMismatch { .. }
                | Error::ParseError { .. }
                | Error::InconsistentWidth { .. }
                | Error::UnknownPreset(_)
                | Error::InvalidParameter(_)
                | Error::UnsupportedDimension { .. }
                | Error::IoError(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::IoError(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
