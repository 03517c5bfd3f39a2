use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Core {
        path: PathBuf,
        #[source]
        source: graphseg_core::Error,
    },
    #[error(transparent)]
    Model(#[from] graphseg_core::Error),
    #[error("{path}, line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{0}: no input series found")]
    NoInput(PathBuf),
    #[error("config: {0}")]
    Config(String),
    #[error("{dataset} ({stage}): {source}")]
    Stage {
        dataset: String,
        stage: &'static str,
        #[source]
        source: graphseg_core::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
