//! Command-line harness wiring configs to experiments: ODE convergence
//! benchmarking, model building, training, evaluation, parameter counting,
//! and gradient checking.
//!
//! Exit-code contract: 0 success, 1 runtime/data error, 2 usage error.

#![forbid(unsafe_code)]

pub mod commands;
mod error;
pub mod run_config;
pub mod training;

pub use error::{CliError, Result};
