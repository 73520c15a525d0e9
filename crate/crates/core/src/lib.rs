//! Pseudo-spectral toolkit for the Ginzburg–Landau energy on the two-sphere.
//!
//! Fields are sampled on Gauss–Legendre grids and represented spectrally in
//! real scalar and vector spherical harmonics. On top of that sit the
//! energy, its first and second variations, closed-form harmonic-map
//! families, Procrustes and Möbius alignment, and a gradient-flow plus
//! Newton–Krylov solver for critical points.

pub mod analytic;
pub mod error;
pub mod gl;
pub mod krylov;
pub mod mobius;
pub mod rotation;
pub mod second_variation;
pub mod solver;
pub mod spherical;
pub mod vsh;

pub use error::{Error, Result};
