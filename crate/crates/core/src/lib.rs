//! Harmonic analysis on graded p-adic Lie groups: duals, Fourier analysis,
//! Vladimirov–Taibleson type operators and the supporting estimates.

pub mod analysis;
pub mod dual;
pub mod error;
pub mod fourier;
pub mod group;
pub mod operators;
pub mod padic;
pub mod suites;

pub use error::{Error, Result};

/// Dense complex matrix used for Fourier coefficients and symbols.
pub type CMat = nalgebra::DMatrix<num_complex::Complex64>;
