use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("misaligned grids: {0}")]
    Misaligned(String),
    #[error("fixed-point iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    PicardDiverged { residual: f64, iterations: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("config: {0}")]
    Config(String),
    #[error("study: {0}")]
    Study(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
