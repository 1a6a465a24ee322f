use thiserror::Error;

use crate::jta::Domain;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("numerical failure at step {step}: {reason}")]
    Numerical { step: usize, reason: String },

    #[error("expected a {expected:?}-domain amplitude, got {found:?}")]
    Domain { expected: Domain, found: Domain },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{0} of an all-zero amplitude is undefined")]
    ZeroField(&'static str),

    #[error("time shift rejected: {0}")]
    Shift(String),

    #[error("calibration impossible: {0}")]
    Calibration(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("objective failed at tau1 = {tau1:e} s, tau2 = {tau2:e} s: {source}")]
    Objective {
        tau1: f64,
        tau2: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures that stem from the configuration rather than the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Validation(_) | Error::Calibration(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical { .. } | Error::Fit(_) | Error::Shift(_) | Error::ZeroField(_) => true,
            Error::Objective { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
