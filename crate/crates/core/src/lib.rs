//! Spectral analysis and simulation of isotropic Lévy processes on spheres.

pub mod error;
pub mod special_fn;
pub mod spectrum;
pub mod kernel;
pub mod asymptotics;
pub mod simulate;
pub mod gelfand;
pub mod cli;

pub use error::{Error, Result};
