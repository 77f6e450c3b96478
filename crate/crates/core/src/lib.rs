//! Bayesian futility monitoring, interim-analysis timing and power simulation
//! for multi-arm factorial trials with a binary cure endpoint.
//!
//! The crate is organised bottom-up:
//!
//! - [`num`]: incomplete beta, binomial and beta-binomial tails, quadrature, RNG streams
//! - [`priors`]: beta prior elicitation by effective sample size and conjugate updates
//! - [`monitoring`]: the posterior-probability stopping rule, boundaries and stop probabilities
//! - [`design`]: factorial structure, allocation, recruitment and outcome-lag projections
//! - [`sim`]: Monte Carlo simulation of sequential monitoring
//! - [`analysis`]: logistic regression with marginal risk differences, tests and power
//! - [`config`] and [`cli`]: the command-line front end

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod design;
mod error;
pub mod monitoring;
pub mod num;
pub mod output;
pub mod priors;
pub mod sim;

pub use error::{Error, Result};
