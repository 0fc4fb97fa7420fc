//! Monte Carlo laboratory for Steinhaus random multiplicative functions.

pub mod concentration;
pub mod counting;
pub mod error;
pub mod euler;
pub mod experiments;
pub mod gaussian;
pub mod multiplicative;
pub mod output;
pub mod phases;
pub mod sieve;
pub mod stats;

pub use error::{LabError, Result};
pub use phases::{PhaseAssignment, Seed};
