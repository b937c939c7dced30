//! Random and canonical test fields.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::spectral::{GridSpec, RawField, SpectralField};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Random divergence-free field supported on the retained band, built from a
/// Gaussian stream function with spectrum `1/(1+|k|²)` and rescaled to
/// `‖u‖_H = h_norm`.
pub fn random_solenoidal<R: Rng + ?Sized>(grid: GridSpec, rng: &mut R, h_norm: f64) -> SpectralField {
    random_solenoidal_with(grid, rng, h_norm, |k1, k2| 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64))
}

/// As [`random_solenoidal`] with a caller-supplied stream-function amplitude
/// profile. Modes where the profile vanishes are left empty.
pub fn random_solenoidal_with<R: Rng + ?Sized>(
    grid: GridSpec,
    rng: &mut R,
    h_norm: f64,
    profile: impl Fn(i64, i64) -> f64,
) -> SpectralField {
    let mut raw = RawField::zeros(grid);
    let (m1, m2) = (grid.kmax1(), grid.kmax2());
    for k1 in 0..=m1 {
        for k2 in -m2..=m2 {
            // one representative per ±k pair
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let amp = profile(k1, k2);
            if amp == 0.0 {
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let psi = Complex64::new(re, im) * amp;
            let i = Complex64::new(0.0, 1.0);
            raw.set_pair(k1, k2, [i * psi * k2 as f64, -i * psi * k1 as f64]);
        }
    }
    let mut u = SpectralField::from_raw_unchecked(raw);
    let n = crate::spectral::sobolev_norm(&u, 0.0, None);
    if n > 0.0 {
        u = u.scaled(h_norm / n);
    }
    u
}

/// Random real scalar coefficients (Hermitian, zero mean) in the retained
/// band, stored in the first component of a [`RawField`].
pub fn random_scalar<R: Rng + ?Sized>(grid: GridSpec, rng: &mut R) -> RawField {
    let mut raw = RawField::zeros(grid);
    for k1 in 0..=grid.kmax1() {
        for k2 in -grid.kmax2()..=grid.kmax2() {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let w = 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64);
            raw.set_pair(k1, k2, [Complex64::new(re, im) * w, ZERO]);
        }
    }
    raw
}

impl SpectralField {
    /// `u = (amp·sin(k x₂), 0)`: no horizontal dependence, hence undamped and
    /// a fixed point of the deterministic dynamics.
    pub fn vertical_shear(grid: GridSpec, amp: f64, k: i64) -> SpectralField {
        let mut raw = RawField::zeros(grid);
        raw.set_pair(0, k, [Complex64::new(0.0, -0.5 * amp), ZERO]);
        SpectralField::from_raw_unchecked(raw)
    }

    /// `u = (0, amp·sin(k x₁))`.
    pub fn horizontal_shear(grid: GridSpec, amp: f64, k: i64) -> SpectralField {
        let mut raw = RawField::zeros(grid);
        raw.set_pair(k, 0, [ZERO, Complex64::new(0.0, -0.5 * amp)]);
        SpectralField::from_raw_unchecked(raw)
    }

    /// Divergence-free field with stream function `cos(k·x + phase)`,
    /// normalized to `‖u‖_H = 1`.
    pub fn unit_mode(grid: GridSpec, k1: i64, k2: i64, phase: f64) -> SpectralField {
        assert!(k1 != 0 || k2 != 0, "unit_mode needs a nonzero wavenumber");
        let kk = ((k1 * k1 + k2 * k2) as f64).sqrt();
        let psi = Complex64::from_polar(0.5 * std::f64::consts::SQRT_2 / kk, phase);
        let i = Complex64::new(0.0, 1.0);
        let mut raw = RawField::zeros(grid);
        raw.set_pair(k1, k2, [i * psi * k2 as f64, -i * psi * k1 as f64]);
        SpectralField::from_raw_unchecked(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::sobolev_norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_fields_satisfy_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [4, 8, 16, 32] {
            let u = random_solenoidal(GridSpec::square(n), &mut rng, 2.0);
            u.check_invariants().unwrap();
            assert!((sobolev_norm(&u, 0.0, None) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_fields() {
        let g = GridSpec::square(8);
        for u in [
            SpectralField::vertical_shear(g, 1.0, 1),
            SpectralField::horizontal_shear(g, 3.0, 2),
            SpectralField::unit_mode(g, 1, -2, 0.3),
        ] {
            u.check_invariants().unwrap();
        }
        assert!((sobolev_norm(&SpectralField::unit_mode(g, 2, 1, 1.0), 0.0, None) - 1.0).abs() < 1e-15);
        // ‖sin x₂‖² over the torus is 2π², i.e. 1/2 with the unit-weight convention
        assert!((sobolev_norm(&SpectralField::vertical_shear(g, 1.0, 1), 0.0, None).powi(2) - 0.5).abs() < 1e-15);
    }
}
