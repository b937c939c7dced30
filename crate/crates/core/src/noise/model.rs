use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{leray_project, sobolev_norm, Fft2, GridSpec, RawField, ScalarGridField, SpectralField};

/// Scalar map `g: R² → R` of the multiplicative example, evaluated at
/// `(u¹(x), u²(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GMap {
    /// `offset + tanh(x₁) + tanh(x₂)`.
    BoundedSmooth { offset: f64 },
    /// `offset + R·tanh(x₁/R)`: identity near the origin, slope at most one.
    IdentityClip { radius: f64, offset: f64 },
}

impl Default for GMap {
    fn default() -> Self {
        GMap::BoundedSmooth { offset: 1.0 }
    }
}

impl GMap {
    #[inline]
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        match *self {
            GMap::BoundedSmooth { offset } => offset + x1.tanh() + x2.tanh(),
            GMap::IdentityClip { radius, offset } => offset + radius * (x1 / radius).tanh(),
        }
    }

    /// Global Lipschitz constant w.r.t. the Euclidean norm on `R²`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            GMap::BoundedSmooth { .. } => std::f64::consts::SQRT_2,
            GMap::IdentityClip { .. } => 1.0,
        }
    }
}

/// Optional time dependence `σ(t, u) = (1 + a·sin(ωt)) σ(0, u)`, used to
/// exercise the Hölder-in-time condition.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    #[default]
    Constant,
    Sinusoid { amplitude: f64, frequency: f64 },
}

impl TimeProfile {
    #[inline]
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Sinusoid { amplitude, frequency } => 1.0 + amplitude * (frequency * t).sin(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeProfile::Constant)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// `σ(t,u)y = Σ_k y_k φ_k` with fixed divergence-free templates.
    Additive { templates: Vec<SpectralField> },
    /// `σ(t,u)y = Σ_k y_k P_H(b_k g(u))`, vector-valued `b_k` sampled on the
    /// collocation grid.
    Multiplicative { coeffs: Vec<[ScalarGridField; 2]>, g: GMap },
    /// `σ(t,u)e₁ = s·∂₁u`: grows with the horizontal gradient; fails the
    /// small-constant conditions for large `s`.
    DerivativeFeedback { scale: f64 },
}

/// Diffusion coefficient with truncation level `trunc`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub grid: GridSpec,
    pub kind: NoiseKind,
    pub trunc: usize,
    pub time: TimeProfile,
    /// Hölder exponent used when fitting the time-continuity constant.
    pub alpha: f64,
}

impl NoiseModel {
    pub fn additive(templates: Vec<SpectralField>) -> Result<Self> {
        let grid = *templates.first().ok_or_else(|| Error::domain("additive model needs a template"))?.grid();
        for t in &templates {
            if t.grid() != &grid {
                return Err(Error::shape("templates live on different grids"));
            }
            t.check_invariants()?;
        }
        let trunc = templates.len();
        Ok(NoiseModel { grid, kind: NoiseKind::Additive { templates }, trunc, time: TimeProfile::Constant, alpha: 1.0 })
    }

    /// `trunc` stream-function modes at the lowest wavenumbers (cos and sin
    /// phase per wavevector), amplitudes `∝ 1/|k|` and total Hilbert–Schmidt
    /// norm `hs` in `H`.
    pub fn default_additive(grid: GridSpec, trunc: usize, hs: f64) -> Result<Self> {
        let waves = low_wavevectors(grid, trunc.div_ceil(2));
        if 2 * waves.len() < trunc {
            return Err(Error::domain(format!("grid too small for {trunc} noise modes")));
        }
        let mut templates = Vec::with_capacity(trunc);
        'outer: for &(k1, k2) in &waves {
            for phase in [0.0, std::f64::consts::FRAC_PI_2] {
                if templates.len() == trunc {
                    break 'outer;
                }
                let w = 1.0 / ((k1 * k1 + k2 * k2) as f64).sqrt();
                templates.push(SpectralField::unit_mode(grid, k1, k2, phase).scaled(w));
            }
        }
        let total: f64 = templates.iter().map(|t| sobolev_norm(t, 0.0, None).powi(2)).sum::<f64>().sqrt();
        let templates = templates.into_iter().map(|t| t.scaled(hs / total)).collect();
        Self::additive(templates)
    }

    /// Multiplicative example with `b_k = a_k (cos(m_k·x), sin(m_k·x))` on the
    /// lowest wavevectors (`m_0 = 0`), amplitudes chosen so that
    /// `Σ‖b_k‖²_∞`, `Σ‖∂₁b_k‖²_∞`, `Σ‖∂₂b_k‖²_∞` are all at most `m_cap`.
    pub fn remark_example(grid: GridSpec, trunc: usize, m_cap: f64, g: GMap) -> Result<Self> {
        if trunc == 0 {
            return Err(Error::domain("multiplicative model needs at least one mode"));
        }
        let mut waves = vec![(0, 0)];
        waves.extend(low_wavevectors(grid, trunc - 1));
        if waves.len() < trunc {
            return Err(Error::domain(format!("grid too small for {trunc} noise modes")));
        }
        let coeffs = waves
            .iter()
            .map(|&(m1, m2)| {
                let weight = (m1.abs().max(m2.abs()).max(1) as f64).powi(2);
                let a = (m_cap / (trunc as f64 * weight)).sqrt();
                let c = ScalarGridField::from_fn(grid, |x1, x2| a * (m1 as f64 * x1 + m2 as f64 * x2).cos())?;
                let s = ScalarGridField::from_fn(grid, |x1, x2| a * (m1 as f64 * x1 + m2 as f64 * x2).sin())?;
                Ok([c, s])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NoiseModel {
            grid,
            kind: NoiseKind::Multiplicative { coeffs, g },
            trunc,
            time: TimeProfile::Constant,
            alpha: 1.0,
        })
    }

    pub fn derivative_feedback(grid: GridSpec, scale: f64) -> Self {
        NoiseModel { grid, kind: NoiseKind::DerivativeFeedback { scale }, trunc: 1, time: TimeProfile::Constant, alpha: 1.0 }
    }

    pub fn with_time_profile(mut self, time: TimeProfile) -> Self {
        self.time = time;
        self
    }

    pub fn is_time_homogeneous(&self) -> bool {
        self.time.is_constant()
    }

    pub fn is_additive(&self) -> bool {
        matches!(self.kind, NoiseKind::Additive { .. })
    }

    /// `(Σ‖b_k‖²_∞, Σ‖∂₁b_k‖²_∞, Σ‖∂₂b_k‖²_∞)` for the multiplicative example,
    /// with derivatives taken spectrally.
    pub fn coefficient_mass(&self) -> Option<[f64; 3]> {
        let NoiseKind::Multiplicative { coeffs, .. } = &self.kind else {
            return None;
        };
        let mut fft = Fft2::new(self.grid.n1, self.grid.n2);
        let mut mass = [0.0; 3];
        for b in coeffs.iter().take(self.trunc) {
            let raw = RawField::from_physical(self.grid, [b[0].values(), b[1].values()], &mut fft).ok()?;
            for (slot, field) in [raw.clone(), raw.derivative(1), raw.derivative(2)].iter().enumerate() {
                let [p, q] = field.to_physical(&mut fft);
                let sup = p.iter().zip(&q).map(|(a, b)| a * a + b * b).fold(0.0, f64::max);
                mass[slot] += sup;
            }
        }
        Some(mass)
    }
}

/// Lattice wavevectors in the half plane ordered by `|k|`, then `k₁`, `k₂`.
fn low_wavevectors(grid: GridSpec, count: usize) -> Vec<(i64, i64)> {
    let (m1, m2) = (grid.kmax1(), grid.kmax2());
    let mut ks: Vec<(i64, i64)> = (0..=m1)
        .flat_map(|k1| (-m2..=m2).map(move |k2| (k1, k2)))
        .filter(|&(k1, k2)| k1 > 0 || k2 > 0)
        .collect();
    ks.sort_by_key(|&(k1, k2)| (k1 * k1 + k2 * k2, k1, k2));
    ks.truncate(count);
    ks
}

/// Norms for Hilbert–Schmidt evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormSpace {
    HMinus1,
    H,
    H01,
    V,
}

impl NormSpace {
    pub fn norm(self, u: &RawField) -> f64 {
        match self {
            NormSpace::HMinus1 => sobolev_norm(u, -1.0, None),
            NormSpace::H => sobolev_norm(u, 0.0, None),
            NormSpace::H01 => sobolev_norm(u, 0.0, Some(1.0)),
            NormSpace::V => sobolev_norm(u, 1.0, None),
        }
    }
}

/// Collocation-grid FFT reused across `σ` evaluations.
#[derive(Debug)]
pub struct SigmaWorkspace {
    fft: Fft2,
}

impl SigmaWorkspace {
    pub fn new(grid: GridSpec) -> Self {
        SigmaWorkspace { fft: Fft2::new(grid.n1, grid.n2) }
    }

    fn g_values(&mut self, g: &GMap, u: &SpectralField) -> Vec<f64> {
        let [u1, u2] = u.to_physical(&mut self.fft);
        u1.iter().zip(&u2).map(|(&a, &b)| g.eval(a, b)).collect()
    }

    fn project_product(&mut self, grid: GridSpec, b: [&[f64]; 2], gu: &[f64]) -> Result<SpectralField> {
        let p: Vec<f64> = b[0].iter().zip(gu).map(|(x, y)| x * y).collect();
        let q: Vec<f64> = b[1].iter().zip(gu).map(|(x, y)| x * y).collect();
        let mut raw = RawField::from_physical(grid, [&p, &q], &mut self.fft)?;
        raw.truncate();
        leray_project(&raw)
    }

    /// `σ(t, u) y` using the first `trunc` entries of `y`.
    pub fn apply(&mut self, model: &NoiseModel, t: f64, u: &SpectralField, y: &[f64]) -> Result<SpectralField> {
        if y.len() < model.trunc {
            return Err(Error::shape(format!("{} noise coordinates for truncation {}", y.len(), model.trunc)));
        }
        if u.grid() != &model.grid {
            return Err(Error::shape("state and noise model live on different grids"));
        }
        let y = &y[..model.trunc];
        let tf = model.time.factor(t);
        match &model.kind {
            NoiseKind::Additive { templates } => {
                let mut out = RawField::zeros(model.grid);
                for (tpl, &yk) in templates.iter().zip(y) {
                    if yk != 0.0 {
                        out.add_scaled(yk * tf, tpl);
                    }
                }
                Ok(SpectralField::from_raw_unchecked(out))
            }
            NoiseKind::Multiplicative { coeffs, g } => {
                if y.iter().all(|&v| v == 0.0) {
                    return Ok(SpectralField::zero(model.grid));
                }
                let gu = self.g_values(g, u);
                let n = model.grid.len();
                let (mut c1, mut c2) = (vec![0.0; n], vec![0.0; n]);
                for (b, &yk) in coeffs.iter().zip(y) {
                    for i in 0..n {
                        c1[i] += yk * tf * b[0].values()[i];
                        c2[i] += yk * tf * b[1].values()[i];
                    }
                }
                self.project_product(model.grid, [&c1, &c2], &gu)
            }
            NoiseKind::DerivativeFeedback { scale } => Ok(u.d1().scaled(scale * tf * y[0])),
        }
    }

    /// `out += scale · σ(t, u) y`, without allocating for additive models.
    pub fn add_apply(
        &mut self,
        model: &NoiseModel,
        t: f64,
        u: &SpectralField,
        y: &[f64],
        scale: f64,
        out: &mut RawField,
    ) -> Result<()> {
        if let NoiseKind::Additive { templates } = &model.kind {
            if y.len() < model.trunc {
                return Err(Error::shape(format!("{} noise coordinates for truncation {}", y.len(), model.trunc)));
            }
            let f = scale * model.time.factor(t);
            for (tpl, &yk) in templates.iter().zip(&y[..model.trunc]) {
                out.add_scaled(f * yk, tpl);
            }
            return Ok(());
        }
        let v = self.apply(model, t, u, y)?;
        out.add_scaled(scale, &v);
        Ok(())
    }

    /// `σ(t, u) e_k` for `k < trunc`.
    pub fn columns(&mut self, model: &NoiseModel, t: f64, u: &SpectralField) -> Result<Vec<SpectralField>> {
        let tf = model.time.factor(t);
        match &model.kind {
            NoiseKind::Additive { templates } => {
                Ok(templates.iter().take(model.trunc).map(|tpl| tpl.scaled(tf)).collect())
            }
            NoiseKind::Multiplicative { coeffs, g } => {
                let gu = self.g_values(g, u);
                coeffs
                    .iter()
                    .take(model.trunc)
                    .map(|b| Ok(self.project_product(model.grid, [b[0].values(), b[1].values()], &gu)?.scaled(tf)))
                    .collect()
            }
            NoiseKind::DerivativeFeedback { scale } => Ok(vec![u.d1().scaled(scale * tf)]),
        }
    }
}

pub fn apply_sigma(model: &NoiseModel, t: f64, u: &SpectralField, y: &[f64]) -> Result<SpectralField> {
    SigmaWorkspace::new(model.grid).apply(model, t, u, y)
}

/// `‖σ(t,u)‖_{L₂(ℓ², space)} = (Σ_k ‖σ(t,u)e_k‖²_space)^{1/2}`.
pub fn hs_norm(model: &NoiseModel, t: f64, u: &SpectralField, space: NormSpace) -> Result<f64> {
    let cols = SigmaWorkspace::new(model.grid).columns(model, t, u)?;
    Ok(cols.iter().map(|c| space.norm(c).powi(2)).sum::<f64>().sqrt())
}

/// `σ(t,u)ΔW` with `ΔW_k ~ N(0, dt)` independent for `k < trunc`.
pub fn sample_increment<R: Rng + ?Sized>(
    model: &NoiseModel,
    t: f64,
    u: &SpectralField,
    dt: f64,
    rng: &mut R,
) -> Result<SpectralField> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("time step {dt} must be positive")));
    }
    let sd = dt.sqrt();
    let dw: Vec<f64> = (0..model.trunc).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    apply_sigma(model, t, u, &dw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_solenoidal;
    use crate::spectral::inner;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn models(grid: GridSpec) -> Vec<NoiseModel> {
        vec![
            NoiseModel::default_additive(grid, 16, 1.0).unwrap(),
            NoiseModel::remark_example(grid, 8, 1.0, GMap::default()).unwrap(),
            NoiseModel::remark_example(grid, 5, 0.5, GMap::IdentityClip { radius: 2.0, offset: 0.5 }).unwrap(),
            NoiseModel::derivative_feedback(grid, 0.7),
        ]
    }

    #[test]
    fn zero_coordinates_give_zero_field() {
        let g = GridSpec::square(16);
        let u = random_solenoidal(g, &mut ChaCha8Rng::seed_from_u64(1), 1.0);
        for m in models(g) {
            let out = apply_sigma(&m, 0.3, &u, &vec![0.0; m.trunc]).unwrap();
            assert_eq!(out.max_amplitude(), 0.0);
        }
    }

    #[test]
    fn single_template_is_reproduced() {
        let g = GridSpec::square(8);
        let phi = SpectralField::unit_mode(g, 1, 1, 0.2).scaled(0.4);
        let m = NoiseModel::additive(vec![phi.clone()]).unwrap();
        let out = apply_sigma(&m, 0.0, &SpectralField::zero(g), &[1.0]).unwrap();
        assert_eq!(out, phi);
    }

    #[test]
    fn short_coordinates_are_rejected() {
        let g = GridSpec::square(8);
        let m = NoiseModel::default_additive(g, 4, 1.0).unwrap();
        assert!(matches!(apply_sigma(&m, 0.0, &SpectralField::zero(g), &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn sigma_is_linear_in_coordinates() {
        let g = GridSpec::square(16);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_solenoidal(g, &mut rng, 1.5);
        for m in models(g) {
            let y1: Vec<f64> = (0..m.trunc).map(|_| rng.sample(StandardNormal)).collect();
            let y2: Vec<f64> = (0..m.trunc).map(|_| rng.sample(StandardNormal)).collect();
            let sum: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
            let a = apply_sigma(&m, 0.0, &u, &y1).unwrap();
            let b = apply_sigma(&m, 0.0, &u, &y2).unwrap();
            let c = apply_sigma(&m, 0.0, &u, &sum).unwrap();
            let d = c.lin_comb(1.0, &a.lin_comb(1.0, &b, 1.0), -1.0);
            assert!(d.max_amplitude() <= 1e-12 * c.max_amplitude().max(1.0));
            c.check_invariants().unwrap();
        }
    }

    #[test]
    fn additive_hs_norm_is_state_independent() {
        let g = GridSpec::square(16);
        let m = NoiseModel::default_additive(g, 16, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h0 = hs_norm(&m, 0.0, &SpectralField::zero(g), NormSpace::H).unwrap();
        assert!((h0 - 2.0).abs() < 1e-12);
        for _ in 0..5 {
            let u = random_solenoidal(g, &mut rng, 3.0);
            let h = hs_norm(&m, rng.random::<f64>(), &u, NormSpace::H).unwrap();
            assert_eq!(h, h0);
        }
        let NoiseKind::Additive { templates } = &m.kind else { unreachable!() };
        let direct: f64 = templates.iter().map(|t| sobolev_norm(t, 1.0, None).powi(2)).sum::<f64>().sqrt();
        assert!((hs_norm(&m, 0.0, &SpectralField::zero(g), NormSpace::V).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn multiplicative_hs_norm_at_rest_matches_per_mode_sum() {
        // g(0) = 1, so each column is P_H b_k
        let g = GridSpec::square(16);
        let m = NoiseModel::remark_example(g, 6, 1.0, GMap::BoundedSmooth { offset: 1.0 }).unwrap();
        let NoiseKind::Multiplicative { coeffs, .. } = &m.kind else { unreachable!() };
        let mut fft = Fft2::new(g.n1, g.n2);
        let mut acc = 0.0;
        for b in coeffs {
            let mut raw = RawField::from_physical(g, [b[0].values(), b[1].values()], &mut fft).unwrap();
            raw.truncate();
            let p = leray_project(&raw).unwrap();
            acc += inner(&p, &p);
        }
        let h = hs_norm(&m, 0.0, &SpectralField::zero(g), NormSpace::H).unwrap();
        assert!((h - acc.sqrt()).abs() < 1e-13);
        assert!(h > 0.0);
        let mass = m.coefficient_mass().unwrap();
        assert!(mass.iter().all(|&x| x <= 1.0 + 1e-12), "{mass:?}");
    }

    #[test]
    fn increments_are_reproducible() {
        let g = GridSpec::square(16);
        let m = NoiseModel::remark_example(g, 8, 1.0, GMap::default()).unwrap();
        let u = random_solenoidal(g, &mut ChaCha8Rng::seed_from_u64(5), 1.0);
        let a = sample_increment(&m, 0.0, &u, 0.01, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = sample_increment(&m, 0.0, &u, 0.01, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        assert!(sample_increment(&m, 0.0, &u, 0.0, &mut ChaCha8Rng::seed_from_u64(11)).is_err());
    }

    #[test]
    fn zero_model_gives_zero_increment() {
        let g = GridSpec::square(8);
        let m = NoiseModel::default_additive(g, 4, 0.0).unwrap();
        let inc = sample_increment(&m, 0.0, &SpectralField::zero(g), 0.1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(inc.max_amplitude(), 0.0);
        assert_eq!(hs_norm(&m, 0.0, &SpectralField::zero(g), NormSpace::H).unwrap(), 0.0);
    }
}
