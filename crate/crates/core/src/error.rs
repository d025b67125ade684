use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = IfaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum IfaError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("rank error: requested rank {k} but dimension is {d}")]
    Rank { k: usize, d: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("unsupported dimension {d} (at most {max})")]
    UnsupportedDimension { d: usize, max: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("{path}, line {line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("serialization error: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IfaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IfaError::Io {
            path: path.into(),
            source,
        }
    }
}
