//! Deterministic numerics for generalized-Langevin models of market and
//! stock return rates.
//!
//! The crate is `no_std` and only needs an allocator. It covers:
//!
//! * [`specfun`]: Bessel J₀/J₁, the normalized lambda functions Λ₀/Λ₁ and
//!   both real branches of the Lambert W function.
//! * [`models`]: the self-similarity model catalog, their normalized Laplace
//!   images for the observable and the Langevin force, closed-form ACFs and
//!   the closure residuals that tie the two images together.
//! * [`laplace`]: Fourier-series Bromwich inversion with Euler acceleration
//!   and spectral densities on the imaginary axis.
//! * [`volterra`]: time-domain memory-equation propagation, the
//!   self-consistent solves and the reference GLE path integrator.
//!
//! Random paths, file formats and the command-line front end live in the
//! `gle-lab` companion crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod laplace;
pub mod models;
pub mod series;
pub mod specfun;
pub mod volterra;

pub use error::{Error, Result};
pub use models::{ModelSpec, ShapeEvaluator, ShapeKind, StockClass, StockLabel, Variant};
pub use series::AcfSeries;
