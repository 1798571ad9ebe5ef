//! Fourier pseudospectral time-splitting solver for the free-potential-split
//! Dirac equation on periodic domains, in the nonrelativistic scaling with a
//! small parameter `epsilon` in (0, 1]. The crate provides the two-component
//! (1D) and four-component (2D) forms, Lie-Trotter and Strang compositions,
//! energy-band projectors, resonance classification of time steps, and a
//! convergence-study harness that emits CSV/JSON tables.

pub mod band;
pub mod cache;
pub mod check;
pub mod dirac;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod numeric;
pub mod preset;
pub mod resonance;
pub mod split;
pub mod sweep;

mod error;

pub use error::{Error, Result};
pub use num_complex::Complex64;
