//! Stable-throughput analysis of an energy-harvesting cognitive relay.

pub mod channel;
pub mod error;
pub mod optimize;
pub mod queue;
pub mod rates;
pub mod runner;
pub mod sim;

pub use error::{Error, Result};
