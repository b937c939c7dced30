//! Dealiased advection `B(u, v) = P_H(u·∇v)` and the trilinear form
//! `b(u, v, w) = ⟨B(u, v), w⟩`.
//!
//! Products are formed on a 3/2 zero-padded grid, so for inputs supported on
//! the non-Nyquist lattice the quadratic terms are exact on every mode of
//! the `n1 × n2` lattice.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{inner, leray_project, sobolev_norm, Fft2, GridSpec, RawField, SpectralField};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Padded FFT plan and scratch buffers; one per thread of work.
#[derive(Debug)]
pub struct AdvectionWorkspace {
    grid: GridSpec,
    fft: Fft2,
    m: (usize, usize),
    bufs: [Vec<Complex64>; 4],
}

impl AdvectionWorkspace {
    pub fn new(grid: GridSpec) -> Self {
        let m = grid.padded();
        let len = m.0 * m.1;
        AdvectionWorkspace {
            grid,
            fft: Fft2::new(m.0, m.1),
            m,
            bufs: std::array::from_fn(|_| vec![ZERO; len]),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    fn padded_index(&self, k1: i64, k2: i64) -> usize {
        let i1 = k1.rem_euclid(self.m.0 as i64) as usize;
        let i2 = k2.rem_euclid(self.m.1 as i64) as usize;
        i1 * self.m.1 + i2
    }

    /// Loads `a + i·b` (two real fields given by their coefficients and a
    /// per-mode multiplier) into buffer `slot` and transforms to physical
    /// space. Real part holds `a`, imaginary part `b`.
    fn load_pair(
        &mut self,
        slot: usize,
        a: (&RawField, usize, Complex64Mult),
        b: (&RawField, usize, Complex64Mult),
    ) {
        let mut buf = std::mem::take(&mut self.bufs[slot]);
        buf.iter_mut().for_each(|z| *z = ZERO);
        for idx in 0..self.grid.len() {
            if self.grid.is_nyquist(idx) {
                continue;
            }
            let (k1, k2) = self.grid.wavenumber(idx);
            let za = a.0.coeffs()[idx][a.1] * a.2.at(k1, k2);
            let zb = b.0.coeffs()[idx][b.1] * b.2.at(k1, k2);
            if za == ZERO && zb == ZERO {
                continue;
            }
            buf[self.padded_index(k1, k2)] = za + I * zb;
        }
        self.fft.inverse(&mut buf);
        self.bufs[slot] = buf;
    }

    /// Transforms buffer `slot` (holding `p + i·q` with `p, q` real) back and
    /// splits the coefficients of `p` and `q` on the `n1 × n2` lattice.
    fn unload_pair(&mut self, slot: usize) -> RawField {
        let mut buf = std::mem::take(&mut self.bufs[slot]);
        self.fft.forward(&mut buf);
        let norm = 1.0 / (self.m.0 * self.m.1) as f64;
        let mut out = RawField::zeros(self.grid);
        for idx in 0..self.grid.len() {
            if self.grid.is_nyquist(idx) {
                continue;
            }
            let (k1, k2) = self.grid.wavenumber(idx);
            let z = buf[self.padded_index(k1, k2)];
            let zc = buf[self.padded_index(-k1, -k2)].conj();
            out.coeffs_mut()[idx] = [0.5 * (z + zc) * norm, -0.5 * I * (z - zc) * norm];
        }
        self.bufs[slot] = buf;
        out
    }

    /// Coefficients of `u·∇v` (no projection, no truncation), exact on the
    /// `n1 × n2` lattice.
    pub fn convective(&mut self, u: &RawField, v: &RawField) -> Result<RawField> {
        if u.grid() != &self.grid || v.grid() != &self.grid {
            return Err(Error::shape("advection operands live on different grids"));
        }
        use Complex64Mult::*;
        self.load_pair(0, (u, 0, One), (u, 1, One));
        self.load_pair(1, (v, 0, D1), (v, 0, D2));
        self.load_pair(2, (v, 1, D1), (v, 1, D2));
        let [uu, d0, d1, out] = &mut self.bufs;
        for (((o, a), b), c) in out.iter_mut().zip(uu.iter()).zip(d0.iter()).zip(d1.iter()) {
            let (u1, u2) = (a.re, a.im);
            let p1 = u1 * b.re + u2 * b.im;
            let p2 = u1 * c.re + u2 * c.im;
            *o = Complex64::new(p1, p2);
        }
        let mut res = self.unload_pair(3);
        res.symmetrize();
        Ok(res)
    }

    /// `B(u, v) = P_H(u·∇v)` restricted to the retained band.
    pub fn advect(&mut self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        let mut c = self.convective(u, v)?;
        c.truncate();
        leray_project(&c)
    }

    /// `|⟨∂₂u¹, ∂₂(u·∇u¹)⟩|`. Accepts arbitrary (also non-solenoidal) input.
    pub fn partial2_identity(&mut self, u: &RawField) -> Result<f64> {
        let c = self.convective(u, u)?;
        let acc: f64 = u
            .iter_modes()
            .zip(c.coeffs())
            .map(|(((_, k2), a), b)| (k2 * k2) as f64 * (a[0] * b[0].conj()).re)
            .sum();
        Ok(acc.abs())
    }
}

#[derive(Clone, Copy)]
enum Complex64Mult {
    One,
    D1,
    D2,
}

impl Complex64Mult {
    #[inline]
    fn at(self, k1: i64, k2: i64) -> Complex64 {
        match self {
            Complex64Mult::One => Complex64::new(1.0, 0.0),
            Complex64Mult::D1 => Complex64::new(0.0, k1 as f64),
            Complex64Mult::D2 => Complex64::new(0.0, k2 as f64),
        }
    }
}

/// `B(u, v)` with a fresh workspace.
pub fn advect(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    AdvectionWorkspace::new(*u.grid()).advect(u, v)
}

/// `b(u, v, w) = ⟨B(u, v), w⟩`.
pub fn trilinear(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
    if w.grid() != u.grid() {
        return Err(Error::shape("trilinear operands live on different grids"));
    }
    let b = advect(u, v)?;
    Ok(inner(&b, w))
}

/// `|⟨∂₂u¹, ∂₂(u·∇u¹)⟩|`, which vanishes for divergence-free `u`.
pub fn partial2_identity_check(u: &RawField) -> Result<f64> {
    AdvectionWorkspace::new(*u.grid()).partial2_identity(u)
}

/// Weight `a` in front of `‖∂₁u‖²` in the anisotropic bound on `b(u, v, u)`.
pub const DEFAULT_ESTIMATE_WEIGHT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRow {
    pub sample_id: usize,
    pub ratio_a3: f64,
    pub ratio_a4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub weight: f64,
    pub rows: Vec<EstimateRow>,
    pub max_ratio_a3: f64,
    pub max_ratio_a4: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Empirical constants for the two trilinear bounds
///
/// * `|b(u,v,u)| ≤ a‖∂₁u‖² + C‖u‖²(1 + ‖v‖²_{H^{1,1}})`
/// * `|b(u,v,w)| ≤ C‖u‖_{H¹}‖v‖_{H^{1,1}}‖w‖`
///
/// evaluated on `(u, v, w)` triples. Constants are recorded, not checked.
pub fn estimate_diagnostic(samples: &[(SpectralField, SpectralField, SpectralField)], weight: f64) -> Result<EstimateReport> {
    let mut rows = Vec::with_capacity(samples.len());
    let mut ws: Option<AdvectionWorkspace> = None;
    for (id, (u, v, w)) in samples.iter().enumerate() {
        let ws = ws.get_or_insert_with(|| AdvectionWorkspace::new(*u.grid()));
        let b_uv = ws.advect(u, v)?;
        let b_uvu = inner(&b_uv, u).abs();
        let b_uvw = inner(&b_uv, w).abs();
        let h = sobolev_norm(u, 0.0, None);
        let d1u = sobolev_norm(&u.d1(), 0.0, None);
        let v11 = sobolev_norm(v, 1.0, Some(1.0));
        let den3 = weight * d1u * d1u + h * h * (1.0 + v11 * v11);
        let den4 = sobolev_norm(u, 1.0, None) * v11 * sobolev_norm(w, 0.0, None);
        rows.push(EstimateRow { sample_id: id, ratio_a3: ratio(b_uvu, den3), ratio_a4: ratio(b_uvw, den4) });
    }
    let max_ratio_a3 = rows.iter().map(|r| r.ratio_a3).fold(0.0, f64::max);
    let max_ratio_a4 = rows.iter().map(|r| r.ratio_a4).fold(0.0, f64::max);
    Ok(EstimateReport { weight, rows, max_ratio_a3, max_ratio_a4 })
}

impl EstimateReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "sample_id,ratio_a3,ratio_a4")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.sample_id, r.ratio_a3, r.ratio_a4)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_solenoidal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shear_flows_have_no_self_advection() {
        let g = GridSpec::square(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // general vertical shear: any profile f(x₂) in the first component
        let mut vs = RawField::zeros(g);
        let mut hs = RawField::zeros(g);
        for k in 1..=g.kmax2() {
            let z = Complex64::new(rand::Rng::random::<f64>(&mut rng), rand::Rng::random::<f64>(&mut rng));
            vs.set_pair(0, k, [z, ZERO]);
            hs.set_pair(k, 0, [ZERO, z]);
        }
        for raw in [vs, hs] {
            let u = SpectralField::try_from_raw(raw).unwrap();
            let b = advect(&u, &u).unwrap();
            // zero up to transform rounding
            assert!(b.max_amplitude() <= 1e-14);
            assert!(partial2_identity_check(&u).unwrap() <= 1e-13);
            assert!(trilinear(&u, &u, &u).unwrap().abs() <= 1e-14);
        }
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let u = SpectralField::zero(GridSpec::square(8));
        let v = SpectralField::zero(GridSpec::square(16));
        assert!(matches!(advect(&u, &v), Err(Error::Shape(_))));
        assert!(trilinear(&u, &u, &v).is_err());
    }

    #[test]
    fn advect_output_is_solenoidal() {
        let g = GridSpec::square(32);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_solenoidal(g, &mut rng, 1.0);
        let v = random_solenoidal(g, &mut rng, 1.0);
        let b = advect(&u, &v).unwrap();
        b.check_invariants().unwrap();
        assert!(b.divergence_defect() <= 1e-12);
    }

    #[test]
    fn estimate_ratios_for_degenerate_inputs() {
        let g = GridSpec::square(16);
        let z = SpectralField::zero(g);
        let s = SpectralField::vertical_shear(g, 1.0, 2);
        let rep = estimate_diagnostic(&[(z.clone(), z.clone(), z.clone()), (s.clone(), s.clone(), s)], DEFAULT_ESTIMATE_WEIGHT).unwrap();
        assert!(rep.max_ratio_a3 <= 1e-14);
        assert!(rep.max_ratio_a4 <= 1e-14);
        let mut out = Vec::new();
        rep.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("sample_id,ratio_a3,ratio_a4\n0,0,0\n1,"));
    }
}
