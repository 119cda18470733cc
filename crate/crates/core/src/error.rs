use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("fractional order q = {0} is outside (0, 1]")]
    InvalidOrder(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    EigenNonConvergence(usize),

    #[error("Mittag-Leffler series did not converge within {0} terms")]
    SeriesNonConvergence(usize),

    #[error("argument |z| = {0} exceeds the series radius 5")]
    ArgumentOutOfRange(f64),

    #[error("spectrum is not real; use the full Matignon test")]
    ComplexSpectrum,

    #[error("equilibrium residual {0:e} exceeds certification threshold")]
    UncertifiedEquilibrium(f64),

    #[error("gain grid has {0} points, limit is 1000000")]
    GridTooLarge(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
