use thiserror::Error;

/// Errors raised by the landscape toolkit.
///
/// Every variant names the module (or field) that produced it so that callers
/// such as the command-line front end can map it to an exit code and a message
/// without further context.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("{module}: non-finite state at step {step}")]
    Divergence { module: &'static str, step: usize },

    #[error("{module}: no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        module: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{what}: insufficient statistics ({count} < {required})")]
    InsufficientStatistics {
        what: &'static str,
        count: usize,
        required: usize,
    },

    #[error("saddle verification failed: {0}")]
    SaddleVerification(String),

    #[error("not a minimum: {0}")]
    NotAMinimum(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dimension(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}
