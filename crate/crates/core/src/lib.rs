//! Regularized regression in the proportional regime.
//!
//! The crate bundles the pieces needed to compare finite-sample behaviour of
//! Ridge, Lasso and ridge-penalized robust regression against their
//! state-evolution predictions, under Gaussian and non-Gaussian designs:
//!
//! * [`scalar`]: proximal maps, Moreau envelopes and the robust losses.
//! * [`models`]: seeded design / noise / signal generators and model instances.
//! * [`solvers`]: Ridge, Lasso, robust and least-squares solvers with optimality certificates.
//! * [`asymptotics`]: fixed-point systems, population laws and theoretical risks.
//! * [`inference`]: debiased Lasso, noise-level estimation and confidence intervals.
//! * [`experiments`]: replicated Monte Carlo drivers and 1-D distribution distances.
//! * [`cli`]: the `ulab` command-line front end.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod models;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
