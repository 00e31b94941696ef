use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("transport error for {url}: {message} (attempts: {})", attempts.join("; "))]
    Transport { url: String, message: String, attempts: Vec<String> },

    #[error("request to {url} timed out; retry with a smaller page size")]
    Timeout { url: String },

    #[error("endpoint {url} returned HTTP {status}: {body}")]
    Endpoint { url: String, status: u16, body: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("replay cache miss for {0}")]
    ReplayMiss(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing upstream artifact {path}: run `{stage}` first")]
    Dependency { stage: String, path: PathBuf },

    #[error("load error: {0}")]
    Load(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures caused by the network or a remote service.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            Error::Transport { .. }
                | Error::Timeout { .. }
                | Error::Endpoint { .. }
                | Error::ReplayMiss(_)
                | Error::Protocol(_)
        )
    }
}
