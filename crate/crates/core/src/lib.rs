//! Ridge and minimum-norm interpolation classifiers on symmetric
//! Gaussian-mixture data.
//!
//! Data follow `X = y μᵀ + Z Σ^{1/2}` with Rademacher labels `y`, diagonal
//! covariance `Σ` and labels flipped independently with probability `η`. The
//! crate samples such data, solves the ridge problem in Gram space through an
//! explicit decomposition, evaluates the closed-form margin bounds, measures
//! the concentration events they rely on, and runs Monte-Carlo quantile
//! experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod events;
pub mod experiments;
pub mod model;
pub mod rng;
pub mod solver;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};
pub use model::{CovariateLaw, Dataset, ProblemSpec};
pub use spectrum::Spectrum;
