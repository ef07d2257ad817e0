//! Transferable Bayesian fault classification for kernelized linear
//! state-transition models.
//!
//! The library models a system as x_{t+1} = A·φ_d(x_t, u_t) + ε_t, fits A
//! by (weighted) ridge least squares, and detects faults through the
//! closed-form log-likelihood ratio between "the fitted matrix generated
//! this pair" and "some matrix-normal perturbation of it did". A logistic
//! layer over the classifier's separated trace/logdet features, an MLP
//! regression baseline, a synthetic telemetry pipeline, and the Monte
//! Carlo / transfer experiment harnesses sit on top.
//!
//! Everything is deterministic given explicit 64-bit seeds.

pub mod bayes;
pub mod cli;
pub mod data;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod kernel;
pub mod mlp;

pub use error::{Error, Result};
