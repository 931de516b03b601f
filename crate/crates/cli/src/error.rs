use std::path::PathBuf;

/// CLI failures, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("compute failure: {0}")]
    Compute(#[from] quadscore::Error),

    #[error("output error on {}: {source}", .path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::NotFound(_) => 3,
            CliError::Compute(_) | CliError::Output { .. } => 4,
        }
    }

    /// Maps a core error raised while loading data to a data error.
    pub fn from_load(e: quadscore::Error) -> Self {
        match e {
            quadscore::Error::Io { path, source }
                if source.kind() == std::io::ErrorKind::NotFound =>
            {
                CliError::NotFound(path)
            }
            other => CliError::Data(other.to_string()),
        }
    }

    pub fn output(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Output { path, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
