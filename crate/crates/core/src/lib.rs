pub mod agent;
pub mod evalstat;
pub mod expanse;
pub mod harness;
pub mod learn;
pub mod error;
pub mod simworld;
pub mod syncsec;

pub use error::{AuthError, Error, Result};
