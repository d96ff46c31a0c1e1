use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("parse error in `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("precondition `{clause}` failed: {detail}")]
    Precondition { clause: String, detail: String },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("quadrature did not reach tolerance: value {value:e}, estimated error {error:e}")]
    Quadrature { value: f64, error: f64 },

    #[error("singular evaluation: {0}")]
    Singular(String),
}

impl Error {
    /// Numerical failures (as opposed to bad input) map to a distinct CLI exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Quadrature { .. } | Error::Singular(_))
    }

    pub(crate) fn precondition(clause: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Precondition {
            clause: clause.into(),
            detail: detail.into(),
        }
    }
}
