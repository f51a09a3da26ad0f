pub mod asc;
pub mod behavior;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod ks;
pub mod policy;
pub mod quantum;
pub mod random;
pub mod rng;
pub mod sat;
pub mod signaling;
pub mod stats;

pub use error::{Error, Result};
