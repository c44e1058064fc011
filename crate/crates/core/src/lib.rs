//! Bayesian inference for a Gaussian spatial linear model whose covariates are
//! observed with classical measurement error.
//!
//! The model for a response observed at sites `s_1, …, s_n` is
//!
//! ```text
//! y(s) = μ(s)β + σ ε(s) + σω ρ(s) + στ V(s)β
//! ```
//!
//! where `μ(s)` is the observed (error-prone) covariate row, `ε` a unit-variance
//! isotropic Gaussian field with correlation `C_θ`, `ρ` white noise and `V` a
//! standardized measurement-error field on the error-prone columns. Inference is
//! by data augmentation: `ε` and `V` are sampled alongside
//! `η = (β, σ², ω², τ², θ)` in a Metropolis-within-Gibbs sweep ([`mcmc`]).
//!
//! Setting `τ² = 0` and dropping `V` gives the naive model that ignores the
//! measurement error; both share the same sampler.

pub mod correlation;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod mcmc;
pub mod model;
pub mod prediction;
pub mod rng;
pub mod simulation;

#[cfg(test)]
mod oracle;

pub use error::{Error, Result};
