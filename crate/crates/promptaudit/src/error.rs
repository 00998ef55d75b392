use std::io;
use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// One or more configuration violations, reported together.
    #[error("configuration error:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("template error: {0}")]
    Template(String),

    /// Transport or protocol failure after all retries were exhausted.
    #[error("backend error for model '{model}': {message}")]
    Backend { model: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("metrics domain error: {0}")]
    Metrics(String),

    /// Malformed input data (CSV rows, script records, manifests).
    #[error("malformed input: {0}")]
    Input(String),

    #[error("report error: {0}")]
    Report(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}

pub type Result<T> = std::result::Result<T, Error>;
