use thiserror::Error;

use crate::linalg::SolveStats;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index space overflow while forming a {rows}x{cols} product")]
    IndexOverflow { rows: usize, cols: usize },

    #[error("GMRES did not converge: {0:?}")]
    NotConverged(SolveStats),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("operator verification failed: {0}")]
    Verification(String),

    #[error("malformed coefficient data: {0}")]
    CoefficientData(String),
}
