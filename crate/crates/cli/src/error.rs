use noisy_ifa::IfaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<IfaError> for CliError {
    fn from(e: IfaError) -> Self {
        let msg = e.to_string();
        match e {
            IfaError::Io { .. } => CliError::Io(msg),
            IfaError::Numeric(_) | IfaError::Estimation(_) => CliError::Numeric(msg),
            IfaError::Dimension(_)
            | IfaError::Rank { .. }
            | IfaError::Config(_)
            | IfaError::Parameter(_)
            | IfaError::Size(_)
            | IfaError::UnsupportedDimension { .. }
            | IfaError::Parse { .. }
            | IfaError::Format(_) => CliError::Validation(msg),
        }
    }
}

pub fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
