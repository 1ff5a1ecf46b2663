//! Desk-scale simulation and estimation toolkit for gradient-field sensing on
//! a small hard-core qubit chain: closed and open lattice dynamics, Fisher
//! information, simulated shot acquisition with readout error, grid-based
//! Bayesian estimation, scaling-exponent extraction, and the localization
//! transition scan.

pub mod analysis;
pub mod basis;
pub mod bayes;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fisher;
pub mod hamiltonian;
pub mod lindblad;
pub mod measurement;

pub use error::{Error, Result};

/// Toolkit version embedded in output artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
