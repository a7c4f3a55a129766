use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    /// Process exit status for the error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<dualband::Error> for CliError {
    fn from(e: dualband::Error) -> Self {
        match e {
            dualband::Error::Config(m) => CliError::Config(m),
            dualband::Error::Domain { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl CliError {
    /// The message without the category prefix.
    pub fn detail(&self) -> String {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m.clone(),
            other => other.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
