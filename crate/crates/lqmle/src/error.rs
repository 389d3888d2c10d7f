use std::path::PathBuf;

/// Failures surfaced by the command-line tool, each mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] lqmle_core::Error),
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    /// 2 usage or malformed input, 3 I/O, 4 numeric failure, 5 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } | CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::NotConverged(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
