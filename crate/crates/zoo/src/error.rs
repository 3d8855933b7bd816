use thiserror::Error;

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("perturbation dimension must be at least 1")]
    InvalidDimension,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("perturbation entry {value} outside [0.5, 1] in magnitude")]
    InvalidPerturbation { value: f64 },

    #[error("parameter vector contains a non-finite entry at index {index}")]
    NonFiniteParams { index: usize },

    #[error("loss oracle returned non-finite value {value} at a probe point")]
    NonFiniteLoss { value: f64, point: Vec<f64> },

    #[error("loss oracle failed: {0}")]
    Oracle(#[source] Box<dyn std::error::Error + Send + Sync>),

    #[error("iteration budget must be at least 1")]
    EmptyBudget,

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),

    #[error("unknown benchmark function `{0}`")]
    UnknownBenchmark(String),

    #[error("trace export failed: {0}")]
    Export(#[from] csv::Error),
}
