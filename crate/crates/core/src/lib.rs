pub mod analysis;
pub mod collective;
pub mod cumulant;
pub mod error;
pub mod exact;
pub mod exec;
pub mod meanfield;
pub mod model;
pub mod ode;

pub use error::{Error, Result};
