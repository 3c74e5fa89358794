use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state space of {states} states exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: usize, limit: usize },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("series of length {len} is shorter than the required {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
