use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}coordinate {value} in dimension {dim} lies outside [{lo}, {hi}]", row_prefix(.row))]
    OutOfDomain {
        row: Option<usize>,
        dim: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not positive definite: pivot {pivot:e} at index {index} (jitter {jitter:e})")]
    NotPositiveDefinite { index: usize, pivot: f64, jitter: f64 },

    #[error("power iteration did not converge in {iterations} iterations (last estimate {estimate:e})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),
}

fn row_prefix(row: &Option<usize>) -> String {
    match row {
        Some(r) => format!("row {r}: "),
        None => String::new(),
    }
}

impl Error {
    /// Attach a row index to an out-of-domain error.
    pub fn in_row(self, r: usize) -> Self {
        match self {
            Error::OutOfDomain { dim, value, lo, hi, .. } => Error::OutOfDomain {
                row: Some(r),
                dim,
                value,
                lo,
                hi,
            },
            other => other,
        }
    }

    /// True for failures of the numerical kind (factorisation, convergence).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::NoConvergence { .. } | Error::Calibration(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
