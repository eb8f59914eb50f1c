//! Infinite-width NNGP kernels for fully connected networks, and Monte Carlo
//! machinery for checking finite-width ensembles against them.

pub mod cli;
pub mod config;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod network;
pub mod nonlinearity;
pub mod observables;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
