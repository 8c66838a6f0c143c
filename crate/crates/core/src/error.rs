use thiserror::Error;

use crate::model::ParameterState;

#[derive(Debug, Error)]
pub enum HbestError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Numerical breakdown inside the sampler. Carries the state at the time
    /// of failure so callers can dump it for inspection.
    #[error("sampler failure at iteration {iteration}: {message}")]
    SamplerFailure {
        iteration: usize,
        message: String,
        state: Option<Box<ParameterState>>,
    },
}

impl HbestError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HbestError::InvalidInput(msg.into())
    }

    pub(crate) fn failure(msg: impl Into<String>) -> Self {
        HbestError::SamplerFailure {
            iteration: 0,
            message: msg.into(),
            state: None,
        }
    }

    /// Attach the iteration index and state to a sampler failure.
    pub(crate) fn at_iteration(self, iteration: usize, state: &ParameterState) -> Self {
        match self {
            HbestError::SamplerFailure { message, .. } => HbestError::SamplerFailure {
                iteration,
                message,
                state: Some(Box::new(state.clone())),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, HbestError>;
