use thiserror::Error;

/// Errors raised by the numerical core and the experiment runner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("unsupported Matérn smoothness {0} (supported: 0.5, 1.5, 2.5)")]
    UnsupportedSmoothness(f64),

    #[error("linear-kernel input has norm {0} > 1; rescale inputs to the unit ball")]
    OutsideUnitBall(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("duplicate domain point at indices {0} and {1}")]
    DuplicatePoint(usize, usize),

    #[error("matrix not positive definite after jitter escalation ({stage})")]
    NotPositiveDefinite { stage: &'static str },

    #[error("singular design matrix ({0})")]
    SingularDesign(&'static str),

    #[error("design routine failed: max predictive norm {achieved} exceeds bound {bound} after {iterations} iterations")]
    DesignFailed {
        achieved: f64,
        bound: f64,
        iterations: usize,
    },
}

impl Error {
    /// True for failures of the numerical routines (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::SingularDesign(_) | Error::DesignFailed { .. }
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
