//! Numerical laboratory for ψ-super-Brownian motion: branching mechanisms and
//! gauge functions, discretized Lévy trees and Brownian snakes, the Palm
//! (spine) picture, packing estimators and deterministic bound series.

pub mod bounds;
pub mod error;
pub mod mechanism;
pub(crate) mod ode;
pub mod packing;
pub(crate) mod quad;
pub mod rng;
pub mod spine_palm;
pub mod trees_snakes;

pub use error::{Error, Result};
