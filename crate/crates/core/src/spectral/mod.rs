//! Fourier representation of periodic vector fields on the torus.

mod fft;
mod field;
mod grid;
mod ops;

pub use fft::Fft2;
pub use field::{RawField, ScalarGridField, SpectralField};
pub use grid::{DealiasFraction, GridSpec};
pub use ops::{
    inner, leray_project, mixed_norm, mixed_norm_vh, mollify, sobolev_norm, Exponent,
};

pub use num_complex::Complex64;
