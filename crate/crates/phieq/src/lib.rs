pub mod cli;
pub mod deviations;
pub mod efp;
pub mod ellipsoid;
pub mod error;
pub mod games;
pub mod geometry;
pub mod learning;
pub mod numerics;

pub use error::{Error, Result};
