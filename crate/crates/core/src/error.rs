use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("degenerate vector (norm {norm:e} at or below {eps:e})")]
    DegenerateVector { norm: f64, eps: f64 },

    #[error("numerics error: {0}")]
    Numerics(String),

    #[error("prototype pool is empty: {0}")]
    EmptyPool(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid annotation: {0}")]
    Annotation(String),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
