use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed formula: {0}")]
    MalformedFormula(String),

    #[error("DIMACS parse error at line {line}: {message}")]
    Dimacs { line: usize, message: String },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("missing value: {0}")]
    Missing(String),

    #[error("no search trace recorded (enable tracing in solver options)")]
    NoTrace,

    #[error("pool exhausted: {0}")]
    PoolExhausted(String),

    #[error("translation parse error: {0}")]
    Translate(String),

    #[error("request error (HTTP {status}): {body}")]
    Request { status: u16, body: String },

    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Analysis(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
