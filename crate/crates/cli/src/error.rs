use std::path::PathBuf;

use hbest_core::HbestError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, missing or malformed input files.
    #[error("{0}")]
    Input(String),
    /// The sampler or a numerical routine failed.
    #[error("{message}")]
    Numerical {
        message: String,
        dump: Option<PathBuf>,
    },
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

impl From<HbestError> for CliError {
    fn from(e: HbestError) -> Self {
        match e {
            HbestError::InvalidInput(_) | HbestError::Degenerate(_) => {
                CliError::Input(e.to_string())
            }
            HbestError::SamplerFailure { .. } => CliError::Numerical {
                message: e.to_string(),
                dump: None,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("I/O error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
