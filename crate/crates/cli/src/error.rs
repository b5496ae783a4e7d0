use thiserror::Error;

/// Failures of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent configuration (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    /// Numerical failure during training or sampling (exit code 3).
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// `eval` found a metric outside its configured threshold (exit code 4).
    #[error("one or more metrics failed their thresholds")]
    Threshold,
    /// Anything else, e.g. unreadable inputs or unwritable outputs (exit code 1).
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Threshold => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<active_diffusion::Error> for CliError {
    fn from(e: active_diffusion::Error) -> Self {
        use active_diffusion::Error as E;
        match e {
            _ if e.is_numeric() => CliError::Numeric(e.to_string()),
            E::InvalidInput(_) | E::InvalidTime { .. } | E::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
