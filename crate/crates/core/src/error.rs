use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("non-finite value in {what} at sample {index}")]
    NonFinite { what: String, index: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("step aborted at t = {t}: {reason}")]
    StepAborted { t: f64, reason: String },

    #[error("forcing evaluation failed at t = {t}: {reason}")]
    Forcing { t: f64, reason: String },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("unknown scenario `{name}` (known: {known})")]
    UnknownScenario { name: String, known: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
