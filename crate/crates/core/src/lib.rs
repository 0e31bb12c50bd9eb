//! Sparse-array FMCW MIMO radar imaging.
//!
//! Numeric routines are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod doa;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod image;
pub mod io;
pub mod neural;
pub mod pipeline;
pub mod psf;
pub mod rd;
pub mod scalar;
pub mod synthesis;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

pub type RadarCubeF64 = synthesis::RadarCube<f64>;
pub type RadarCubeF32 = synthesis::RadarCube<f32>;
pub type FeatureImageF64 = features::FeatureImage<f64>;
pub type FeatureImageF32 = features::FeatureImage<f32>;
pub type ImageF64 = image::Image<f64>;
pub type ImageF32 = image::Image<f32>;
