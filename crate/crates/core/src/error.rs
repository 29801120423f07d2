use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structure(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("flow decomposition failed: {0}")]
    Decomposition(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver did not converge after {iterations} iterations")]
    Unconverged { iterations: usize },
    #[error("instance too large for brute force: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;
