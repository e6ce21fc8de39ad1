pub mod contours;
pub mod eigensolver;
pub mod error;
pub mod integrator;
pub mod potential;
pub mod precision;
pub mod sweep;
pub mod wedges;
pub mod wkb;

pub use error::{Error, Result};
