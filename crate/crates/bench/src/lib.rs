//! Experiment harness for `pnk-core`: problem generators, Matrix Market
//! IO, JSON experiment configs, CSV reports and the `pnk` command line.

pub mod config;
pub mod gen;
pub mod mm;
pub mod runner;
pub mod stability;

use pnk_core::dense::DenseError;
use pnk_core::pnk::PnkError;
use pnk_core::sparse::SparseError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("Matrix Market line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("eigenvalue estimate failed: {0}")]
    Eigen(String),
    #[error("n = {n} exceeds the dense limit {nmax}")]
    TooLarge { n: usize, nmax: usize },
    #[error(transparent)]
    Solver(#[from] PnkError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Dense(#[from] DenseError),
}

pub type Result<T> = std::result::Result<T, BenchError>;
