//! Sequential Bayesian model selection for regular vine copulas.
//!
//! The library provides pair-copula building blocks, regular vine structures
//! with truncation, a reversible jump MCMC sampler that selects tree
//! structures and pair families level by level, frequentist baselines,
//! Bayesian dynamic linear marginal models, and a portfolio forecasting
//! pipeline built on top of the joint model.

pub mod baselines;
pub mod dlm;
pub mod error;
pub mod io;
pub mod pair;
pub mod portfolio;
pub mod quad;
pub mod rjmcmc;
pub mod special;
pub mod stats;
pub mod tree_space;
pub mod vine;

pub use error::{Error, Result};
