use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("objective failure: {0}")]
    Objective(String),

    #[error("analysis input error: {0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Objective(_) => 3,
            Self::Analysis(_) => 4,
            Self::Io(_) | Self::Csv(_) | Self::Json(_) => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
