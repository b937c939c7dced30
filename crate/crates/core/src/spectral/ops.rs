use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{RawField, ScalarGridField, SpectralField};
use crate::error::{Error, Result};

/// Leray projection onto divergence-free, zero-mean fields.
///
/// In two dimensions `û − k(k·û)/|k|²` equals `k⊥ (k⊥·û)/|k|²` with
/// `k⊥ = (−k₂, k₁)`; the latter form is used so that the output is
/// solenoidal to rounding relative to its own size.
pub fn leray_project(f: &RawField) -> Result<SpectralField> {
    let scale = f.max_amplitude();
    let defect = f.hermitian_defect();
    if defect > 1e-10 * scale.max(f64::MIN_POSITIVE) || !f.is_finite() {
        return Err(Error::SymmetryViolation { defect });
    }
    let grid = *f.grid();
    let mut out = f.clone();
    for (idx, c) in out.coeffs_mut().iter_mut().enumerate() {
        let (k1, k2) = grid.wavenumber(idx);
        if (k1 == 0 && k2 == 0) || grid.is_nyquist(idx) {
            *c = [Complex64::new(0.0, 0.0); 2];
            continue;
        }
        let (a, b) = (k1 as f64, k2 as f64);
        let s = (c[1] * a - c[0] * b) / (a * a + b * b);
        *c = [s * (-b), s * a];
    }
    // restore exact symmetry lost to the tolerance above
    if defect > 0.0 {
        out.symmetrize();
    }
    Ok(SpectralField::from_raw_unchecked(out))
}

/// `⟨u, v⟩ = Re Σ_k û_k · conj(v̂_k)`.
pub fn inner(u: &RawField, v: &RawField) -> f64 {
    debug_assert_eq!(u.grid(), v.grid());
    u.coeffs()
        .iter()
        .zip(v.coeffs())
        .map(|(a, b)| (a[0] * b[0].conj() + a[1] * b[1].conj()).re)
        .sum()
}

/// Isotropic `H^s` norm when `s_prime` is `None`, anisotropic `H^{s,s'}`
/// otherwise.
pub fn sobolev_norm(u: &RawField, s: f64, s_prime: Option<f64>) -> f64 {
    let e = match s_prime {
        None => u.weighted_energy(|k1, k2| (1.0 + (k1 * k1 + k2 * k2) as f64).powf(s)),
        Some(sp) => u.weighted_energy(|k1, k2| {
            (1.0 + (k1 * k1) as f64).powf(s) * (1.0 + (k2 * k2) as f64).powf(sp)
        }),
    };
    e.sqrt()
}

/// Smooth low-pass filter `û_k ↦ e^{−|εk|²} û_k`.
pub fn mollify(u: &SpectralField, eps: f64) -> Result<SpectralField> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain(format!("mollifier width {eps} must be positive")));
    }
    let mut out = u.raw().clone();
    let grid = *out.grid();
    for (idx, c) in out.coeffs_mut().iter_mut().enumerate() {
        let (k1, k2) = grid.wavenumber(idx);
        let m = (-(eps * eps) * (k1 * k1 + k2 * k2) as f64).exp();
        c[0] *= m;
        c[1] *= m;
    }
    Ok(SpectralField::from_raw_unchecked(out))
}

/// Lebesgue exponent in `[1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl From<f64> for Exponent {
    fn from(p: f64) -> Self {
        if p == f64::INFINITY {
            Exponent::Infinity
        } else {
            Exponent::Finite(p)
        }
    }
}

impl Exponent {
    fn validate(self) -> Result<Self> {
        match self {
            Exponent::Finite(p) if !(p >= 1.0) || !p.is_finite() => {
                Err(Error::domain(format!("Lebesgue exponent {p} must lie in [1, ∞]")))
            }
            e => Ok(e),
        }
    }

    /// `(Σ h|v|^p)^{1/p}` or `max |v|`.
    fn reduce(self, values: impl Iterator<Item = f64>, h: f64) -> f64 {
        match self {
            Exponent::Infinity => values.fold(0.0, |m, v| m.max(v.abs())),
            Exponent::Finite(p) => values.map(|v| h * v.abs().powf(p)).sum::<f64>().powf(1.0 / p),
        }
    }
}

/// `‖u‖_{L^p_h(L^q_v)}`: inner norm over the vertical variable `x₂`, outer
/// norm over the horizontal variable `x₁`, trapezoid quadrature.
pub fn mixed_norm(u: &ScalarGridField, p_h: impl Into<Exponent>, q_v: impl Into<Exponent>) -> Result<f64> {
    let (p, q) = (p_h.into().validate()?, q_v.into().validate()?);
    let g = u.grid();
    let (h1, h2) = (std::f64::consts::TAU / g.n1 as f64, std::f64::consts::TAU / g.n2 as f64);
    let inner: Vec<f64> = (0..g.n1).map(|i1| q.reduce((0..g.n2).map(|i2| u.at(i1, i2)), h2)).collect();
    Ok(p.reduce(inner.into_iter(), h1))
}

/// `‖u‖_{L^q_v(L^p_h)}`: inner norm over `x₁`, outer over `x₂`.
pub fn mixed_norm_vh(u: &ScalarGridField, q_v: impl Into<Exponent>, p_h: impl Into<Exponent>) -> Result<f64> {
    let (q, p) = (q_v.into().validate()?, p_h.into().validate()?);
    let g = u.grid();
    let (h1, h2) = (std::f64::consts::TAU / g.n1 as f64, std::f64::consts::TAU / g.n2 as f64);
    let inner: Vec<f64> = (0..g.n2).map(|i2| p.reduce((0..g.n1).map(|i1| u.at(i1, i2)), h1)).collect();
    Ok(q.reduce(inner.into_iter(), h2))
}
