//! Model-based clustering with Gaussian mixtures driven by two contrasts: the
//! observed log-likelihood and the conditional classification log-likelihood
//! (log-likelihood minus assignment entropy).
//!
//! The crate covers the full pipeline: stable Gaussian numerics, EM for the
//! maximum-likelihood fit, a projected-gradient polish for the maximum
//! conditional-classification-likelihood fit, penalized selection criteria
//! over the number of components (AIC, BIC, both ICL variants and Lcc-ICL), a
//! population-loss quadrature engine and a Monte Carlo selection-frequency
//! harness.
//!
//! With the default `parallel` feature, restarts, replicates, grid cells and
//! row sweeps run on rayon; reductions keep a fixed order, so results are
//! bit-identical to the sequential fallback build for any worker count.

pub mod contrast;
pub mod data;
pub mod error;
pub mod estimation;
pub mod gaussian;
pub mod model;
mod parallel;
pub mod population;
pub mod reparam;
pub mod rng;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
