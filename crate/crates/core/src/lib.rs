//! Robust sparse Bayesian regression with a correntropy likelihood,
//! its conventional Gaussian-likelihood baseline, bandwidth selection by
//! cross-validation, and a seeded Monte-Carlo benchmark harness.

pub mod bandwidth;
pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod linalg;
pub mod lsr_ard;
pub mod mcr_ard;
pub mod metrics;
pub mod model;
pub mod seed;

pub use error::{Error, Result};
