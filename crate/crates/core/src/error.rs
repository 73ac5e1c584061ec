//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Errors raised by advantage computation, simulation and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller supplied data that violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is out of range or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// The reward scheme cannot produce the requested quantity.
    #[error("degenerate reward scheme: {0}")]
    DegenerateScheme(String),

    /// The simulator produced a non-finite gradient or parameter.
    #[error("simulation fault at step {step}, bucket {bucket}: {detail}")]
    SimulationFault {
        step: usize,
        bucket: usize,
        detail: String,
    },

    /// A line-oriented record could not be parsed.
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
