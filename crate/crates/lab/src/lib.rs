//! Random paths, estimators, file formats and the command-line front end
//! for the `gle-core` models.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod estimate;
pub mod io;
pub mod market;
pub mod noise;

pub use error::{LabError, Result};
