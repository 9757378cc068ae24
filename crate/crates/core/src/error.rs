use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// The solver reached a state the scheme can never produce from valid
    /// inputs, e.g. `D >= N`.
    #[error("corrupted solver state: {0}")]
    CorruptedState(String),

    #[error("IDE parameters cannot be reduced to the ODE model: {0}")]
    NotReducible(String),

    #[error("insufficient data coverage: {0}")]
    Coverage(String),

    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    #[error("{0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
