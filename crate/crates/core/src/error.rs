use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid normalization stats: {0}")]
    InvalidStats(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: String, expected: &'static str },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: String,
        expected: usize,
        found: usize,
    },

    #[error("missing sidecar metadata {0}")]
    MissingSidecar(PathBuf),

    #[error("metadata mismatch: {0}")]
    Metadata(String),

    #[error("region out of bounds on {axis} axis: {detail}")]
    Bounds { axis: &'static str, detail: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
