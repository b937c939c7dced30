//! Diffusion coefficient `σ(t, u)`: a finite-rank map from `ℓ²` to
//! divergence-free fields, its Hilbert–Schmidt norms, noise increments and an
//! empirical checker for the growth and Lipschitz conditions.

mod assumptions;
mod lp;
mod model;

pub use assumptions::{assumption_samples, verify_assumptions, AssumptionReport};
pub use lp::envelope_fit;
pub use model::{
    apply_sigma, hs_norm, sample_increment, GMap, NoiseKind, NoiseModel, NormSpace, SigmaWorkspace,
    TimeProfile,
};
