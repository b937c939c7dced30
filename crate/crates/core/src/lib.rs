//! Pseudo-spectral simulation of the 2D incompressible stochastic Navier–Stokes
//! equation on the torus with viscosity acting only in the horizontal
//! direction (`∂₁²`), together with tools for studying its small-noise and
//! small-time large deviations: skeleton (controlled) dynamics, rate-function
//! minimization and plain Monte Carlo tail estimators.
//!
//! Conventions used throughout the crate:
//!
//! * The torus is `[0, 2π)²`, a field is `u(x) = Σ_k û_k e^{ik·x}`.
//! * The `H` inner product is `⟨u, v⟩ = Σ_k û_k · conj(v̂_k)` (unit weight).
//!   Physical-space integrals carry an extra `(2π)²`.
//! * Velocity states are divergence-free, Hermitian and have zero mean.

// Negated comparisons are used on purpose so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod noise;
pub mod nonlinear;
pub mod random;
pub mod rate;
pub mod seed;
pub mod snapshot;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use spectral::{GridSpec, RawField, ScalarGridField, SpectralField};
