use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] specseg::Error),

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("input {} no longer matches its recorded hash", .0.display())]
    InputChanged(PathBuf),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for configuration, 3 for data, 4 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        use specseg::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(E::Config(_)) => 2,
            CliError::Lib(E::Numerical(_) | E::DegenerateStatistic(_)) => 4,
            _ => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
