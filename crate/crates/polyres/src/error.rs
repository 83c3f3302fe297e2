use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] polyres_core::Error),
    #[error("CSV parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("nothing to write: {0}")]
    Empty(&'static str),
    #[error("plot kind `{kind}` cannot be drawn from {data}")]
    PlotMismatch { kind: &'static str, data: &'static str },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
