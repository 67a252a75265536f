//! Truncated-Wigner simulation of a transversely pumped BEC in a lossy
//! optical cavity, with the analysis needed to classify dissipative time
//! crystal phases.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod params;
pub mod protocol;
pub mod sweep;
pub mod trapmodes;

pub use error::{Error, Result};
