use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::Fft2;
use super::grid::GridSpec;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Per-mode velocity coefficients `(û¹_k, û²_k)`.
pub type ModePair = [Complex64; 2];

/// Fourier coefficients of a 2-component field with no invariants enforced
/// beyond shape. Used for intermediate quantities and for inputs to
/// [`leray_project`](super::leray_project).
#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
    grid: GridSpec,
    coeffs: Vec<ModePair>,
}

impl RawField {
    pub fn zeros(grid: GridSpec) -> Self {
        RawField { grid, coeffs: vec![[ZERO; 2]; grid.len()] }
    }

    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<ModePair>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::shape(format!(
                "{} coefficients for a {}x{} grid",
                coeffs.len(),
                grid.n1,
                grid.n2
            )));
        }
        Ok(RawField { grid, coeffs })
    }

    /// Builds coefficients from a function of the signed wavenumber.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(i64, i64) -> ModePair) -> Self {
        let coeffs = (0..grid.len())
            .map(|idx| {
                let (k1, k2) = grid.wavenumber(idx);
                f(k1, k2)
            })
            .collect();
        RawField { grid, coeffs }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[ModePair] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [ModePair] {
        &mut self.coeffs
    }

    pub fn get(&self, k1: i64, k2: i64) -> ModePair {
        self.coeffs[self.grid.index_of(k1, k2)]
    }

    pub fn set(&mut self, k1: i64, k2: i64, value: ModePair) {
        let idx = self.grid.index_of(k1, k2);
        self.coeffs[idx] = value;
    }

    /// Sets `û_k = value` and `û_{-k} = conj(value)`.
    pub fn set_pair(&mut self, k1: i64, k2: i64, value: ModePair) {
        self.set(k1, k2, value);
        self.set(-k1, -k2, [value[0].conj(), value[1].conj()]);
    }

    pub fn iter_modes(&self) -> impl Iterator<Item = ((i64, i64), &ModePair)> + '_ {
        self.coeffs.iter().enumerate().map(|(idx, c)| (self.grid.wavenumber(idx), c))
    }

    /// Largest `|û_k|` over the lattice.
    pub fn max_amplitude(&self) -> f64 {
        self.coeffs.iter().map(mode_norm).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c[0].re.is_finite() && c[0].im.is_finite() && c[1].re.is_finite() && c[1].im.is_finite())
    }

    /// `max_k |û_{-k} - conj(û_k)|`, Nyquist modes included.
    pub fn hermitian_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for idx in 0..self.coeffs.len() {
            let c = self.grid.conjugate_index(idx);
            for j in 0..2 {
                defect = defect.max((self.coeffs[c][j] - self.coeffs[idx][j].conj()).norm());
            }
        }
        defect
    }

    /// Replaces coefficients by their Hermitian part `(û_k + conj(û_{-k}))/2`.
    pub fn symmetrize(&mut self) {
        let old = self.coeffs.clone();
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            let m = old[self.grid.conjugate_index(idx)];
            for j in 0..2 {
                c[j] = 0.5 * (old[idx][j] + m[j].conj());
            }
        }
    }

    /// Largest `|k·û_k| / ‖û_k‖` over modes with `û_k ≠ 0`.
    pub fn divergence_defect(&self) -> f64 {
        self.iter_modes()
            .filter_map(|((k1, k2), c)| {
                let n = mode_norm(c);
                (n > 0.0).then(|| (c[0] * k1 as f64 + c[1] * k2 as f64).norm() / n)
            })
            .fold(0.0, f64::max)
    }

    /// Zeroes every mode outside the retained (dealiased) band.
    pub fn truncate(&mut self) {
        let grid = self.grid;
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            let (k1, k2) = grid.wavenumber(idx);
            if !grid.is_retained(k1, k2) {
                *c = [ZERO; 2];
            }
        }
    }

    pub fn zero_nyquist(&mut self) {
        let grid = self.grid;
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            if grid.is_nyquist(idx) {
                *c = [ZERO; 2];
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            c[0] *= a;
            c[1] *= a;
        }
    }

    /// `self += a · other`.
    pub fn add_scaled(&mut self, a: f64, other: &RawField) {
        debug_assert_eq!(self.grid, other.grid);
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            c[0] += o[0] * a;
            c[1] += o[1] * a;
        }
    }

    pub fn scaled(&self, a: f64) -> RawField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// Fourier multiplier `i k_dir` applied componentwise (`dir` is 1 or 2).
    pub fn derivative(&self, dir: usize) -> RawField {
        let mut out = self.clone();
        for (idx, c) in out.coeffs.iter_mut().enumerate() {
            let (k1, k2) = self.grid.wavenumber(idx);
            let k = if dir == 1 { k1 } else { k2 };
            let m = if self.grid.is_nyquist(idx) { 0.0 } else { k as f64 };
            let ik = Complex64::new(0.0, m);
            c[0] *= ik;
            c[1] *= ik;
        }
        out
    }

    /// `Σ_k w(k) |û_k|²`.
    pub fn weighted_energy(&self, w: impl Fn(i64, i64) -> f64) -> f64 {
        self.iter_modes()
            .map(|((k1, k2), c)| w(k1, k2) * (c[0].norm_sqr() + c[1].norm_sqr()))
            .sum()
    }

    /// Samples component `j` on the `n1 × n2` collocation grid.
    pub fn component_values(&self, j: usize, fft: &mut Fft2) -> Vec<f64> {
        assert_eq!(fft.shape(), (self.grid.n1, self.grid.n2));
        let mut buf: Vec<Complex64> = self.coeffs.iter().map(|c| c[j]).collect();
        fft.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Physical values of both components.
    pub fn to_physical(&self, fft: &mut Fft2) -> [Vec<f64>; 2] {
        [self.component_values(0, fft), self.component_values(1, fft)]
    }

    /// Forward transform of real collocation values; Nyquist modes are
    /// dropped and the result is symmetrized.
    pub fn from_physical(grid: GridSpec, values: [&[f64]; 2], fft: &mut Fft2) -> Result<RawField> {
        assert_eq!(fft.shape(), (grid.n1, grid.n2));
        let mut out = RawField::zeros(grid);
        let norm = 1.0 / grid.len() as f64;
        for (j, v) in values.iter().enumerate() {
            if v.len() != grid.len() {
                return Err(Error::shape(format!("{} samples for {} grid points", v.len(), grid.len())));
            }
            let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            fft.forward(&mut buf);
            for (c, z) in out.coeffs.iter_mut().zip(buf) {
                c[j] = z * norm;
            }
        }
        out.zero_nyquist();
        out.symmetrize();
        Ok(out)
    }
}

#[inline]
pub(crate) fn mode_norm(c: &ModePair) -> f64 {
    (c[0].norm_sqr() + c[1].norm_sqr()).sqrt()
}

/// A real, divergence-free, zero-mean velocity field.
///
/// Invariants checked by [`SpectralField::try_from_raw`]:
/// Hermitian symmetry, `|k·û_k| ≤ 1e-12 ‖û_k‖`, `û_0 = 0`, zero Nyquist
/// modes, finite coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField(RawField);

impl SpectralField {
    pub const DIV_TOL: f64 = 1e-12;
    pub const HERMITIAN_TOL: f64 = 1e-12;

    pub fn zero(grid: GridSpec) -> Self {
        SpectralField(RawField::zeros(grid))
    }

    pub fn try_from_raw(raw: RawField) -> Result<Self> {
        check_invariants(&raw)?;
        Ok(SpectralField(raw))
    }

    pub(crate) fn from_raw_unchecked(raw: RawField) -> Self {
        debug_assert!(raw.is_finite());
        SpectralField(raw)
    }

    pub fn raw(&self) -> &RawField {
        &self.0
    }

    pub fn into_raw(self) -> RawField {
        self.0
    }

    pub fn check_invariants(&self) -> Result<()> {
        check_invariants(&self.0)
    }

    /// `a·self + b·other`; stays in the divergence-free subspace.
    pub fn lin_comb(&self, a: f64, other: &SpectralField, b: f64) -> SpectralField {
        let mut out = self.0.scaled(a);
        out.add_scaled(b, &other.0);
        SpectralField(out)
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        SpectralField(self.0.scaled(a))
    }

    /// Horizontal derivative `∂₁u`, again divergence-free.
    pub fn d1(&self) -> SpectralField {
        SpectralField(self.0.derivative(1))
    }

    pub fn d2(&self) -> SpectralField {
        SpectralField(self.0.derivative(2))
    }
}

impl Deref for SpectralField {
    type Target = RawField;

    fn deref(&self) -> &RawField {
        &self.0
    }
}

fn check_invariants(raw: &RawField) -> Result<()> {
    if !raw.is_finite() {
        return Err(Error::Invariant("non-finite coefficient".into()));
    }
    let scale = raw.max_amplitude();
    let herm = raw.hermitian_defect();
    if herm > SpectralField::HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SymmetryViolation { defect: herm });
    }
    for (idx, c) in raw.coeffs().iter().enumerate() {
        let (k1, k2) = raw.grid().wavenumber(idx);
        let n = mode_norm(c);
        if n == 0.0 {
            continue;
        }
        if raw.grid().is_nyquist(idx) {
            return Err(Error::Invariant(format!("nonzero Nyquist mode ({k1}, {k2})")));
        }
        if k1 == 0 && k2 == 0 {
            return Err(Error::Invariant("nonzero mean mode".into()));
        }
        let div = (c[0] * k1 as f64 + c[1] * k2 as f64).norm();
        if div > SpectralField::DIV_TOL * n {
            return Err(Error::Invariant(format!(
                "mode ({k1}, {k2}) has divergence {div:e} relative to amplitude {n:e}"
            )));
        }
    }
    Ok(())
}

/// Real samples on the collocation grid, `x₁` index outer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarGridField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarGridField {
    pub fn try_new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::shape(format!("{} samples for {} grid points", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite sample"));
        }
        Ok(ScalarGridField { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for i1 in 0..grid.n1 {
            for i2 in 0..grid.n2 {
                let (x1, x2) = grid.point(i1, i2);
                values.push(f(x1, x2));
            }
        }
        Self::try_new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.values[self.grid.index(i1, i2)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::square(8)
    }

    #[test]
    fn physical_roundtrip_band_limited() {
        let g = grid();
        let mut raw = RawField::zeros(g);
        raw.set_pair(1, 2, [Complex64::new(0.3, -0.1), Complex64::new(-0.2, 0.5)]);
        raw.set_pair(-2, 1, [Complex64::new(0.0, 1.0), Complex64::new(0.7, 0.0)]);
        let mut fft = Fft2::new(g.n1, g.n2);
        let [u1, u2] = raw.to_physical(&mut fft);
        let back = RawField::from_physical(g, [&u1, &u2], &mut fft).unwrap();
        for (a, b) in raw.coeffs().iter().zip(back.coeffs()) {
            assert!((a[0] - b[0]).norm() < 1e-14 && (a[1] - b[1]).norm() < 1e-14);
        }
    }

    #[test]
    fn invariants_reject_bad_fields() {
        let g = grid();
        let mut raw = RawField::zeros(g);
        raw.set(1, 0, [ZERO, Complex64::new(1.0, 0.0)]);
        assert!(matches!(SpectralField::try_from_raw(raw.clone()), Err(Error::SymmetryViolation { .. })));
        raw.set_pair(1, 0, [ZERO, Complex64::new(1.0, 0.0)]);
        assert!(SpectralField::try_from_raw(raw.clone()).is_ok());
        raw.set_pair(1, 1, [Complex64::new(1.0, 0.0), ZERO]);
        assert!(matches!(SpectralField::try_from_raw(raw.clone()), Err(Error::Invariant(_))));
        let mut mean = RawField::zeros(g);
        mean.set(0, 0, [Complex64::new(1.0, 0.0), ZERO]);
        assert!(SpectralField::try_from_raw(mean).is_err());
    }

    #[test]
    fn scalar_field_rejects_nan() {
        let g = grid();
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert!(ScalarGridField::try_new(g, v).is_err());
        assert!(ScalarGridField::try_new(g, vec![0.0; 5]).is_err());
    }
}
