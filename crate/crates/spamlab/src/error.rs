use std::path::PathBuf;

/// Failures of the batch pipeline and its file formats.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Invalid configuration or arguments; nothing has been computed yet.
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] spamlab_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }
}

pub type AppResult<T> = Result<T, AppError>;
