//! Risk-sensitive benchmarked investment under partial observation.
//!
//! The crate simulates a hidden-factor market, runs finite-dimensional
//! filters on the observations, evaluates the original and the separated
//! risk-sensitive criteria under the relevant changes of measure, and solves
//! the deterministic weighted-density equation on the filter parameters.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix `f64`, which is what the Monte-Carlo drivers use.

pub mod criteria;
pub mod error;
pub mod filter;
pub mod io;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod mze;
pub mod rng;
pub mod scenario;
pub mod scalar;
pub mod sde;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Real;

pub type ModelSpec = model::ModelSpec<f64>;
pub type CoefficientMap = model::CoefficientMap<f64>;
pub type HiddenLaw = model::HiddenLaw<f64>;
pub type GaussianFilterState = filter::GaussianFilterState<f64>;
pub type SimplexFilterState = filter::SimplexFilterState<f64>;
