use thiserror::Error;

/// Errors raised by the estimation and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not enough samples: need at least {needed}, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("invalid pair design: {0}")]
    InvalidDesign(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("observed scores violate the selection event (row {row}: residual {residual:e})")]
    InfeasibleSelection { row: usize, residual: f64 },

    #[error("pivot scale is not positive ({0:e})")]
    ZeroPivotScale(f64),
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidConfig(_) | Error::InvalidDesign(_) => ErrorCategory::Config,
            Error::DimensionMismatch { .. }
            | Error::InsufficientSamples { .. }
            | Error::InvalidData(_) => ErrorCategory::Data,
            Error::InfeasibleSelection { .. } | Error::ZeroPivotScale(_) => {
                ErrorCategory::Numerical
            }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
