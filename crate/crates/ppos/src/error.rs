use std::path::{Path, PathBuf};

/// Errors of the command-line layer, each mapped to a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] ppos_core::Error),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, message: impl ToString) -> Self {
        AppError::Parse {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    /// 2 configuration or input, 3 convergence, 4 replicate validity, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use ppos_core::Error as E;
        match self {
            AppError::Io { .. } | AppError::Parse { .. } | AppError::Config(_) => 2,
            AppError::Engine(e) => match e {
                E::NonConvergence(_) => 3,
                E::TooManyInvalid { .. } => 4,
                E::InvalidRecord { .. }
                | E::DuplicateSubject(_)
                | E::InvalidDataset(_)
                | E::MissingHorizon(_)
                | E::InvalidHorizon(_)
                | E::InvalidModel(_)
                | E::InvalidPrior(_)
                | E::InvalidSamplerConfig(_)
                | E::InvalidCounts { .. }
                | E::MissingStatistic(_)
                | E::InvalidRule(_)
                | E::InvalidConfig(_) => 2,
                _ => 1,
            },
        }
    }
}
