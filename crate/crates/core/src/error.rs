use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {what} (requested {requested}, max {max})")]
    Capacity {
        what: &'static str,
        requested: usize,
        max: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid world: {0}")]
    InvalidWorld(String),

    #[error("wav format error in {path}: {reason}")]
    WavFormat { path: PathBuf, reason: String },

    #[error("manifest error{}: {reason}", .session.as_ref().map(|s| format!(" (session {s})")).unwrap_or_default())]
    Manifest {
        session: Option<String>,
        reason: String,
    },

    #[error("segmentation error: {0}")]
    Segment(String),

    #[error("segment too short: {got_s:.4} s, need at least {min_s:.4} s")]
    TooShort { got_s: f64, min_s: f64 },

    #[error("single-class input: {0}")]
    SingleClass(String),

    #[error("missing feature '{0}'")]
    MissingFeature(String),

    #[error("degenerate principal direction: {0}")]
    Degenerate(String),

    #[error("audit precondition failed: {0}")]
    Audit(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
