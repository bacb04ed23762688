//! Imprecise Bayesian neural networks.
//!
//! A finite set of priors and a finite set of likelihoods (architectures)
//! yield one variational posterior per pair. Their predictive distributions
//! span a predictive credal set, from which the crate derives regions with a
//! lower-probability coverage guarantee and an aleatoric/epistemic split of
//! predictive uncertainty.

pub mod baselines;
pub mod bnn;
pub mod credal;
pub mod error;
pub mod eval;
pub mod harness;
pub mod ibnn;
pub mod prob;

pub use error::{Error, Result};
