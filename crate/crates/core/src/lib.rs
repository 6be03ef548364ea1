//! Probability-density waves for free and potential-bound particles, their
//! complex observables, non-unitary evolution and measurement reduction.

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod freewave;
pub mod measurement;
pub mod numeric;
pub mod potential;
pub mod spectral;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
