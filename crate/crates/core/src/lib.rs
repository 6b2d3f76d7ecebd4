//! Simes-type multiple testing, exact order-statistic boundary probabilities,
//! and seeded Monte Carlo verification of Simes-type probability inequalities.
//!
//! Module map:
//!
//! - [`dependence`]: correlation matrices and the Gaussian MTP₂ sufficient
//!   conditions (non-positive precision off-diagonals, sign balance).
//! - [`samplers`]: reproducible draws from multivariate normal and
//!   studentized (multivariate t) models and their absolute values.
//! - [`orderstats`]: the `R_n` statistic, exact iid non-crossing
//!   probabilities, and the pointwise indicator identities.
//! - [`procedures`]: Simes, generalized Simes, Hochberg and
//!   Benjamini–Hochberg, plus critical-value solvers.
//! - [`verify`]: the Monte Carlo inequality harness.
//! - [`twosample`]: the distribution-free two-sample `T_n` test.
//! - [`cli`]: command dispatch and config parsing for the `simes` binary.

pub mod cli;
pub mod dependence;
pub mod dist;
mod error;
pub mod orderstats;
pub mod procedures;
pub mod quadrature;
pub mod samplers;
pub mod twosample;
pub mod verify;

pub use error::{Error, Result};
