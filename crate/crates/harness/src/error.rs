use thiserror::Error;

use baps_core::{CoreError, OracleError};
use baps_zoo::ZooError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("oracle error: {0}")]
    Oracle(#[from] OracleError),

    #[error("training diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: u64, reason: String },

    #[error("model error: {0}")]
    Model(CoreError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code for this failure category.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) => 3,
            HarnessError::Oracle(_) => 4,
            HarnessError::Divergence { .. } => 5,
            HarnessError::Model(_) | HarnessError::Io(_) | HarnessError::Csv(_) => 1,
        }
    }
}

impl From<CoreError> for HarnessError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(msg) => HarnessError::Config(msg),
            CoreError::Format(msg) | CoreError::Generation(msg) => HarnessError::Data(msg),
            CoreError::Io(e) => HarnessError::Io(e),
            other => HarnessError::Model(other),
        }
    }
}

impl From<ZooError> for HarnessError {
    fn from(e: ZooError) -> Self {
        match e {
            ZooError::InvalidHyperparams(msg) => HarnessError::Config(msg),
            ZooError::Export(e) => HarnessError::Csv(e),
            other => HarnessError::Config(other.to_string()),
        }
    }
}
