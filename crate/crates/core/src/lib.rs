//! Simulation of SDEs driven by fractional Brownian motion, discretised
//! fractional operators, and an explicit self-coupling chain used to
//! measure convergence to stationarity.

pub mod coupling;
pub mod error;
pub mod fracops;
pub mod harness;
pub mod noise;
pub mod sde;

pub use error::{Error, Result};
