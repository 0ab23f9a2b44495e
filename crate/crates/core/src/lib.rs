//! Extended-precision laboratory for Newton interpolation on Cantor-type sets
//! and for the smooth extension operator built from it.

pub mod approx;
pub mod cantor;
pub mod cutoff;
pub mod error;
pub mod extension;
pub mod nodes;
pub mod numerics;
pub mod polyops;
pub mod report;
pub mod verify;

pub use error::{Error, Result};
