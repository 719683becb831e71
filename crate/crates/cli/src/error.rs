use ergolab_core::ErgoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),
    #[error("acceptance suite failed: {0}")]
    SuiteFailed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(ErgoError),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::NonConvergence(_) => 3,
            _ => 1,
        }
    }
}

/// Attributes a core error to the config section that produced its inputs.
pub trait Context<T> {
    fn at(self, key: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for ergolab_core::Result<T> {
    fn at(self, key: &str) -> Result<T, CliError> {
        self.map_err(|e| match e {
            ErgoError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            ErgoError::Io(_) | ErgoError::Csv(_) => CliError::Core(e),
            ErgoError::ParamOutOfRange { ref name, .. } => CliError::config(format!("{key}.{name}"), e.to_string()),
            ErgoError::MissingParam(name) => CliError::config(format!("{key}.{name}"), e.to_string()),
            _ => CliError::config(key, e.to_string()),
        })
    }
}
