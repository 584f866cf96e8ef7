use std::path::PathBuf;

/// Errors of the file-based pipeline. Each maps onto a stable process exit
/// code via [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    /// A pipeline stage was run before the stage it depends on.
    #[error("{0}")]
    StageOrder(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Core(#[from] survkan_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// 0 success, 2 usage, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use survkan_core::Error as C;
        match self {
            Error::Usage(_) | Error::StageOrder(_) => 2,
            Error::Data(_) | Error::Io { .. } | Error::Json { .. } | Error::Csv { .. } => 3,
            Error::Core(C::InvalidArgument(_)) => 3,
            Error::Core(C::InvalidState(_)) => 2,
            Error::Core(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> Error {
        let path = path.into();
        move |source| Error::Json { path, source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Error {
        let path = path.into();
        move |source| Error::Csv { path, source }
    }
}
