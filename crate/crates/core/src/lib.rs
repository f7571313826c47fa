//! Simulation of the 1-D stochastic heat equation with multiplicative
//! space-time white noise, and estimation of its diffusivity from local
//! kernel measurements.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod measurements;
pub mod model;
pub mod montecarlo;
pub mod noise;
pub mod quadrature;
pub mod simulator;
pub mod stats;
pub mod tridiag;

pub use error::{Error, Result};
