pub mod channel;
pub mod error;
pub mod finite_key;
pub mod harness;
pub mod orbit;
pub mod strategy;

pub use error::{Error, Result};
