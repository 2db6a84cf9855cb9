use std::path::PathBuf;

/// Errors raised anywhere in the retrieval pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing input: {0}")]
    MissingInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(format!("json: {e}"))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(format!("csv: {e}"))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
