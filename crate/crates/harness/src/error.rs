use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] genbound::Error),
    #[error("run n={n} rep={rep} failed: {source}")]
    Cell { n: usize, rep: usize, source: genbound::Error },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        HarnessError::Parse { path: path.into(), message: message.to_string() }
    }

    /// 2 for bad input or arguments, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(_) | HarnessError::Parse { .. } | HarnessError::Usage(_) => 2,
            HarnessError::Cell { .. } | HarnessError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
