//! Physical-layer authentication for ambient backscatter devices.

pub mod adversary;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod phy;
pub mod protocol;
pub mod scenario;

pub use error::{Error, Result};
