//! Numerical laboratory for a fully cross-diffusive predator-prey system
//! near homogeneous steady states: regime classification, IMEX simulation
//! with zero-flux boundaries, Lyapunov-functional monitoring, decay-rate
//! fitting and discrete functional-inequality verification.

pub mod acceptance;
pub mod analysis;
pub mod config;
pub mod error;
pub mod experiment;
pub mod functionals;
pub mod grid;
pub mod inequalities;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
