use thiserror::Error;

/// Errors produced by the diffusion engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid time {t}: {reason}")]
    InvalidTime { t: f64, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A state, score or step size left the representable range.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("training diverged at iteration {iteration} (loss = {loss})")]
    TrainingDiverged { iteration: u64, loss: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::TrainingDiverged { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
