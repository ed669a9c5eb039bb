//! Simulation and inference for autoregressions whose mean root and
//! log-volatility root both drift toward unity with the sample size.

pub mod cli;
pub mod dgp;
pub mod error;
pub mod estimator;
pub mod ks;
pub mod montecarlo;
pub mod oracles;
pub mod sequences;

pub use error::{Error, Result};
