use thiserror::Error;

/// Errors produced by the simulation and estimation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimension(String),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("pattern not found in basis: {0}")]
    PatternNotFound(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular readout matrix: F0 + F1 must exceed 1, got F0={f0}, F1={f1}")]
    SingularReadout { f0: f64, f1: f64 },
    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),
    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
