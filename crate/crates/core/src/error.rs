use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid too coarse: m = {m}, need at least {min}")]
    Resolution { m: usize, min: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("field has {got} samples, backend has {expected}")]
    Alignment { expected: usize, got: usize },

    #[error("invalid trial function: {0}")]
    InvalidTrial(String),

    #[error("degenerate metric: {0}")]
    Degenerate(String),

    #[error("graph is disconnected: node {0} unreachable")]
    Disconnected(usize),

    #[error("operation `{0}` is not supported on this backend")]
    UnsupportedBackend(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
