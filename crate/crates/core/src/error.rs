use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the estimator, the bandwidth selectors, the simulation
/// harness and the data ingestion layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("no regressor within bandwidth {h} of conditioning point {y}; enlarge the bandwidth")]
    NoLocalData { y: f64, h: f64 },
    #[error("tau must lie in (0, 1), got {0}")]
    InvalidTau(f64),
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("evaluation grid is not sorted")]
    UnsortedGrid,
    #[error("candidate grid is empty")]
    EmptyGrid,
    #[error("invalid plug-in components: {0}")]
    InvalidComponents(String),
    #[error("curvature term is zero; the plug-in bandwidth has no interior minimum")]
    ZeroCurvature,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("regressor scale is zero; cannot derive a bandwidth")]
    DegenerateScale,
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("non-finite value at row {row}")]
    NonFiniteValue { row: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to bad input
    /// data or bad arguments).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoLocalData { .. } | Error::ZeroCurvature | Error::DegenerateScale
        )
    }

    /// True for problems with the data supplied by the caller.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::EmptyInput
                | Error::TooShort { .. }
                | Error::TooFewPoints { .. }
                | Error::FileNotFound(_)
                | Error::Parse { .. }
                | Error::NonFiniteValue { .. }
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
