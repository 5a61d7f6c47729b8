use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical failure in {context} at {point:?}")]
    NumericalFailure { context: String, point: Vec<f64> },

    #[error("measure `{measure}` has no weak derivative with respect to {component}")]
    NoWeakDerivative { measure: String, component: String },

    #[error("invalid measure: mass {mass} at {point:?}")]
    InvalidMeasure { mass: f64, point: Vec<f64> },

    #[error("structure violation: {0}")]
    StructureViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(context: impl Into<String>, point: &[f64]) -> Self {
        Error::NumericalFailure {
            context: context.into(),
            point: point.to_vec(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
