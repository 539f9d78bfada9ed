use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative order {order} exceeds the supported budget {budget}")]
    UnsupportedOrder { order: usize, budget: usize },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("imaginary shift {xi} leaves the analyticity strip of half-width {delta}")]
    StripViolation { xi: f64, delta: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value {value} at {context}")]
    NonFinite { context: String, value: Complex64 },

    #[error("cost {cost:.3e} exceeds the budget {limit:.3e}; pass an explicit override to proceed")]
    BudgetExceeded { cost: f64, limit: f64 },

    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NonHermitian { defect: f64 },

    #[error("shift {z} lies within {distance:.3e} of the spectrum (nearest eigenvalue ~ {nearest})")]
    SingularShift { z: Complex64, nearest: f64, distance: f64 },

    #[error("iteration did not converge after {iterations} steps (last gap {gap:.3e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("contour passes within {distance:.3e} of eigenvalue {eigenvalue}")]
    ContourThroughSpectrum { eigenvalue: Complex64, distance: f64 },

    #[error("weight overflows for eps = {eps}; use eps <= {max_safe_eps:.4e}")]
    Overflow { eps: f64, max_safe_eps: f64 },

    #[error("eps = {eps} exceeds the strip-safe bound {eps0}")]
    StripSafety { eps: f64, eps0: f64 },

    #[error("only {usable} usable samples in the fit window, need {required}")]
    InsufficientWindow { usable: usize, required: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("malformed operator file: {0}")]
    Format(String),

    #[error("operator of {entries} entries ({bytes} bytes) exceeds the memory budget of {limit} bytes")]
    TooLarge { entries: u64, bytes: u64, limit: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}
