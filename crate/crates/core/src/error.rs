use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: max asymmetry {max_asym:.3e} exceeds tolerance {tol:.3e}")]
    SymmetryViolation { max_asym: f64, tol: f64 },

    #[error("numerical failure in {context}")]
    NumericalFailure { context: String },

    #[error("stability violation: {reason}")]
    StabilityViolation { reason: String },

    #[error("rank deficiency in {context}")]
    RankDeficient { context: String },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("matched-model condition violated: {reason}")]
    ModelMismatch { reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integration failure at t = {t}: non-finite value in {component}")]
    IntegrationFailure { t: f64, component: String },

    #[error("range error: {0}")]
    Range(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(context: impl Into<String>, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub fn numerical(context: impl Into<String>) -> Self {
        Error::NumericalFailure {
            context: context.into(),
        }
    }
}
