//! Error type shared across the crate.
//!
//! Validation failures carry the JSON-style path of the offending entry so a
//! CLI user can locate the bad field without reading source code.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data; `path` points at the offending entry
    /// (e.g. `povm[2].matrix[5]`).
    #[error("{path}: {message}")]
    Validation { path: String, message: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("label index {index} out of range (label count {count})")]
    UnknownLabel { index: usize, count: usize },

    #[error("unknown label {label:?}")]
    UnknownLabelName { label: String },

    #[error(
        "matrix is not Hermitian: |A[{row}][{col}] - conj(A[{col}][{row}])| = {violation:.3e} \
         exceeds tolerance {tolerance:.3e}"
    )]
    NonHermitian {
        row: usize,
        col: usize,
        violation: f64,
        tolerance: f64,
    },

    #[error("spectral decomposition failed its accuracy check: {detail}")]
    SpectralAccuracy { detail: String },

    #[error(
        "weight for label {label:?} is {value:.3e}, more negative than the clamp tolerance \
         {tolerance:.3e}; the POVM element is broken"
    )]
    NegativeWeight {
        label: String,
        value: f64,
        tolerance: f64,
    },

    #[error(
        "quadrature did not converge on [{a}, {b}]: worst subinterval [{worst_a}, {worst_b}] \
         with local error {local_error:.3e}"
    )]
    QuadratureNonConvergence {
        a: f64,
        b: f64,
        worst_a: f64,
        worst_b: f64,
        local_error: f64,
    },

    #[error("ODE step size underflow at t = {t} (largest residual on label {label:?})")]
    StepSizeUnderflow { t: f64, label: String },

    #[error("query time {t} precedes the trajectory start {t0}")]
    TimeBeforeStart { t: f64, t0: f64 },

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
