pub mod bundle;
pub mod digest;
pub mod error;
pub mod geometry;
pub mod interventions;
pub mod numeric;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synthlab;
pub mod sula;

pub use error::{Error, Result};
