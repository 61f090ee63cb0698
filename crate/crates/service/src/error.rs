use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),

    #[error("{0}")]
    NotFound(String),

    #[error("{0}")]
    Conflict(String),

    /// The active variant has no fitted weights, so no probabilities exist.
    #[error("{0}")]
    Untrained(String),

    #[error(transparent)]
    Core(#[from] namelink_core::Error),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("state file: {0}")]
    Json(#[from] serde_json::Error),
}
