use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("data error: {0}")]
    Data(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
    pub fn convergence(msg: impl Into<String>) -> Self {
        Error::Convergence(msg.into())
    }
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Prefix the message with the pipeline step that produced it,
    /// preserving the error kind.
    pub fn at_step(self, step: &str) -> Self {
        match self {
            Error::Data(m) => Error::Data(format!("[{step}] {m}")),
            Error::Degenerate(m) => Error::Degenerate(format!("[{step}] {m}")),
            Error::Convergence(m) => Error::Convergence(format!("[{step}] {m}")),
            Error::Parameter(m) => Error::Parameter(format!("[{step}] {m}")),
            Error::Io(e) => Error::Data(format!("[{step}] io error: {e}")),
            Error::Json(e) => Error::Data(format!("[{step}] json error: {e}")),
        }
    }

    /// CLI exit code: 2 for data problems, 3 for convergence problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Data(_) | Error::Io(_) | Error::Json(_) | Error::Parameter(_) => 2,
            Error::Convergence(_) => 3,
            Error::Degenerate(_) => 2,
        }
    }
}
