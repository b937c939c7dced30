//! Rate functions: the small-noise rate `I(z)` through optimal control of
//! the skeleton equation, and the small-time rate by pointwise inversion of
//! `σ(0, ·)` along a given path.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{exp_weight, EquationSpec, Solver, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseModel, SigmaWorkspace};
use crate::spectral::{inner, sobolev_norm, GridSpec, RawField, SpectralField};

/// Piecewise-constant control `φ(t) = values[⌊t/dt_c⌋]` with `ℓ²`
/// coefficients of fixed length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Control {
    dt_c: f64,
    values: Vec<Vec<f64>>,
}

impl Control {
    pub fn new(dt_c: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt_c > 0.0 && dt_c.is_finite()) {
            return Err(Error::domain(format!("control step {dt_c} must be positive")));
        }
        let width = values.first().map(Vec::len).ok_or_else(|| Error::domain("control needs a node"))?;
        if values.iter().any(|v| v.len() != width) {
            return Err(Error::shape("control nodes have different lengths"));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::domain("control values must be finite"));
        }
        Ok(Control { dt_c, values })
    }

    pub fn zeros(dt_c: f64, nodes: usize, width: usize) -> Result<Self> {
        Self::new(dt_c, vec![vec![0.0; width]; nodes])
    }

    /// Same value on `nodes` intervals.
    pub fn constant(dt_c: f64, nodes: usize, value: Vec<f64>) -> Result<Self> {
        Self::new(dt_c, vec![value; nodes])
    }

    pub fn dt_c(&self) -> f64 {
        self.dt_c
    }

    pub fn nodes(&self) -> usize {
        self.values.len()
    }

    pub fn width(&self) -> usize {
        self.values[0].len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt_c * self.values.len() as f64
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Value on the interval containing `t`; times past the horizon use the
    /// last node.
    pub fn value_at(&self, t: f64) -> &[f64] {
        &self.values[node_index(t, self.dt_c, self.values.len())]
    }

    fn from_flat(dt_c: f64, width: usize, x: &[f64]) -> Self {
        Control { dt_c, values: x.chunks(width).map(<[f64]>::to_vec).collect() }
    }

    /// `½∫‖φ‖²_{ℓ²} dt`.
    pub fn energy(&self) -> f64 {
        0.5 * self.dt_c * self.values.iter().flatten().map(|x| x * x).sum::<f64>()
    }

    /// Membership in `S_N = {∫‖φ‖² ≤ N}`.
    pub fn in_ball(&self, n: f64) -> bool {
        2.0 * self.energy() <= n
    }

    pub fn scaled(&self, a: f64) -> Control {
        Control { dt_c: self.dt_c, values: self.values.iter().map(|v| v.iter().map(|x| a * x).collect()).collect() }
    }

    /// CSV with one row per node: start time then the coefficients.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for k in 0..self.width() {
            write!(w, ",phi{k}")?;
        }
        writeln!(w)?;
        for (j, v) in self.values.iter().enumerate() {
            write!(w, "{}", j as f64 * self.dt_c)?;
            for x in v {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn control_energy(phi: &Control) -> f64 {
    phi.energy()
}

/// Outcome of a rate evaluation. `value` is `+∞` exactly when `feasible` is
/// false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub value: f64,
    pub feasible: bool,
    pub residual: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub control: Option<Control>,
}

impl RateResult {
    fn finish(energy: f64, residual: f64, tol: f64, iterations: usize, control: Option<Control>) -> Self {
        let feasible = residual <= tol;
        RateResult { value: if feasible { energy } else { f64::INFINITY }, feasible, residual, iterations, control }
    }
}

/// Minimal energy to steer `ż = −λz + cφ` from `a` to `b` in time `T`.
pub fn lq_rate(lambda: f64, c: f64, a: f64, b: f64, horizon: f64) -> f64 {
    let gap = b - a * (-lambda * horizon).exp();
    if lambda == 0.0 {
        return gap * gap / (2.0 * c * c * horizon);
    }
    gap * gap * lambda / (c * c * (1.0 - (-2.0 * lambda * horizon).exp()))
}

/// A single Fourier mode `(k₁, 0)` driven by one additive template `c·e`
/// with `‖e‖_H = 1`: a scalar Ornstein–Uhlenbeck problem with `λ = k₁²`
/// under the linearized dynamics.
#[derive(Debug, Clone)]
pub struct ScalarMode {
    pub unit: SpectralField,
    pub model: Arc<NoiseModel>,
    pub lambda: f64,
    pub amplitude: f64,
}

impl ScalarMode {
    pub fn new(grid: GridSpec, k1: i64, amplitude: f64) -> Result<Self> {
        if k1 <= 0 || !grid.is_retained(k1, 0) {
            return Err(Error::domain(format!("mode ({k1}, 0) is not resolved on the grid")));
        }
        let unit = SpectralField::horizontal_shear(grid, 1.0, k1);
        let unit = unit.scaled(1.0 / sobolev_norm(&unit, 0.0, None));
        let model = Arc::new(NoiseModel::additive(vec![unit.scaled(amplitude)])?);
        Ok(ScalarMode { unit, model, lambda: (k1 * k1) as f64, amplitude })
    }

    pub fn field(&self, z: f64) -> SpectralField {
        self.unit.scaled(z)
    }

    /// Scalar coordinate `⟨u, e⟩`.
    pub fn coordinate(&self, u: &RawField) -> f64 {
        inner(u, &self.unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Adjoint for linear dynamics with additive noise, finite differences
    /// otherwise.
    #[default]
    Auto,
    Adjoint,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Control step; must be a multiple of the solver step.
    pub dt_c: f64,
    pub penalties: Vec<f64>,
    pub max_iter: usize,
    /// Feasibility tolerance on `‖z(T) − target‖_H / max(1, ‖target‖_H)`.
    pub tol: f64,
    pub gradient: GradientMode,
    pub fd_step: f64,
    /// Drop the advection term (linearized skeleton).
    pub linear: bool,
    pub memory: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            dt_c: 0.01,
            penalties: vec![1e1, 1e3, 1e5, 1e7],
            max_iter: 200,
            tol: 1e-4,
            gradient: GradientMode::Auto,
            fd_step: 1e-6,
            linear: false,
            memory: 8,
        }
    }
}

struct Problem<'a> {
    u0: &'a SpectralField,
    target: &'a SpectralField,
    model: Arc<NoiseModel>,
    cfg: SolverConfig,
    linear: bool,
    dt_c: f64,
    width: usize,
    nodes: usize,
}

impl Problem<'_> {
    fn spec(&self, control: Control) -> EquationSpec {
        let s = EquationSpec::skeleton(self.model.clone(), control);
        if self.linear {
            s.linear()
        } else {
            s
        }
    }

    fn endpoint(&self, x: &[f64]) -> Result<SpectralField> {
        let control = Control::from_flat(self.dt_c, self.width, x);
        let mut cfg = self.cfg.clone();
        cfg.save_every = usize::MAX;
        let mut solver = Solver::new(*self.u0.grid(), self.spec(control), cfg)?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        Ok(solver.solve(self.u0, &mut rng)?.final_state().clone())
    }

    fn misfit(&self, z: &SpectralField) -> SpectralField {
        z.lin_comb(1.0, self.target, -1.0)
    }

    /// `J(x)`; blow-up counts as `+∞`.
    fn objective(&self, x: &[f64], penalty: f64) -> Result<f64> {
        let energy = 0.5 * self.dt_c * x.iter().map(|v| v * v).sum::<f64>();
        match self.endpoint(x) {
            Ok(z) => {
                let r = self.misfit(&z);
                Ok(energy + penalty * inner(&r, &r))
            }
            Err(Error::BlowUp { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Exact gradient of the discrete map for linear additive dynamics.
    fn adjoint_gradient(&self, x: &[f64], penalty: f64) -> Result<(f64, Vec<f64>)> {
        let NoiseKind::Additive { templates } = &self.model.kind else {
            return Err(Error::domain("adjoint gradient needs an additive model"));
        };
        let grid = *self.u0.grid();
        let z = self.endpoint(x)?;
        let r = self.misfit(&z);
        let dt = self.cfg.dt;
        let steps = self.cfg.steps()?;
        let (decay, weight): (Vec<f64>, Vec<f64>) = (0..grid.len())
            .map(|idx| {
                let (k1, k2) = grid.wavenumber(idx);
                let rate = (k1 * k1) as f64 + self.cfg.reg_eps.powi(2) * (k2 * k2) as f64;
                ((-rate * dt).exp(), exp_weight(rate, dt))
            })
            .unzip();
        let mut grad: Vec<f64> = x.iter().map(|v| self.dt_c * v).collect();
        // adj holds D^{N−n−1} r while step n is processed
        let mut adj = r.raw().clone();
        let mut weighted = RawField::zeros(grid);
        for n in (0..steps).rev() {
            for ((w, a), f) in weighted.coeffs_mut().iter_mut().zip(adj.coeffs()).zip(&weight) {
                *w = [a[0] * f, a[1] * f];
            }
            let t = n as f64 * dt;
            let node = node_index(t, self.dt_c, self.nodes);
            let f = 2.0 * penalty * self.model.time.factor(t);
            for (k, tpl) in templates.iter().take(self.model.trunc).enumerate() {
                grad[node * self.width + k] += f * inner(tpl, &weighted);
            }
            for (c, d) in adj.coeffs_mut().iter_mut().zip(&decay) {
                c[0] *= d;
                c[1] *= d;
            }
        }
        let energy = 0.5 * self.dt_c * x.iter().map(|v| v * v).sum::<f64>();
        Ok((energy + penalty * inner(&r, &r), grad))
    }

    fn fd_gradient(&self, x: &[f64], penalty: f64, h: f64) -> Result<(f64, Vec<f64>)> {
        let f0 = self.objective(x, penalty)?;
        let grad = (0..x.len())
            .into_par_iter()
            .map(|i| {
                let step = h * x[i].abs().max(1.0);
                let mut xp = x.to_vec();
                xp[i] += step;
                let fp = self.objective(&xp, penalty)?;
                xp[i] -= 2.0 * step;
                let fm = self.objective(&xp, penalty)?;
                Ok((fp - fm) / (2.0 * step))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((f0, grad))
    }
}

/// Interval containing `t`, tolerant of step times accumulated in floating
/// point (`3 × 0.1` lands in interval 3).
fn node_index(t: f64, dt_c: f64, nodes: usize) -> usize {
    let j = ((t / dt_c) * (1.0 + 1e-12) + 1e-12).floor().max(0.0) as usize;
    j.min(nodes - 1)
}

/// Minimizes `½∫‖φ‖² + p‖z^φ(T) − target‖²_H` along the penalty ladder,
/// warm-starting each stage, with L-BFGS and an Armijo line search.
pub fn minimize_small_noise_rate(
    u0: &SpectralField,
    target: &SpectralField,
    model: Arc<NoiseModel>,
    cfg: &SolverConfig,
    opt: &OptimizerSettings,
) -> Result<RateResult> {
    if target.grid() != u0.grid() {
        return Err(Error::shape("target and initial state live on different grids"));
    }
    let steps = cfg.steps()?;
    let ratio = opt.dt_c / cfg.dt;
    if !(ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
        return Err(Error::domain(format!("control step {} is not a multiple of dt = {}", opt.dt_c, cfg.dt)));
    }
    let per_node = ratio.round() as usize;
    if steps % per_node != 0 {
        return Err(Error::domain("horizon is not a whole number of control intervals"));
    }
    if opt.penalties.is_empty() || opt.penalties.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::domain("penalty ladder must be nonempty and positive"));
    }
    let problem = Problem {
        u0,
        target,
        width: model.trunc,
        model: model.clone(),
        cfg: cfg.clone(),
        linear: opt.linear,
        dt_c: opt.dt_c,
        nodes: steps / per_node,
    };
    let adjoint = match opt.gradient {
        GradientMode::Adjoint => true,
        GradientMode::FiniteDifference => false,
        GradientMode::Auto => opt.linear && model.is_additive() && cfg.clip_norm.is_none(),
    };
    let eval = |x: &[f64], p: f64| -> Result<(f64, Vec<f64>)> {
        if adjoint {
            problem.adjoint_gradient(x, p)
        } else {
            problem.fd_gradient(x, p, opt.fd_step)
        }
    };

    let mut x = vec![0.0; problem.nodes * problem.width];
    let mut iterations = 0;
    for &p in &opt.penalties {
        iterations += lbfgs(&mut x, |x| eval(x, p), |x| problem.objective(x, p), opt.max_iter, opt.memory)?;
    }
    let control = Control::from_flat(opt.dt_c, problem.width, &x);
    let z = problem.endpoint(&x)?;
    let residual = sobolev_norm(&problem.misfit(&z), 0.0, None) / sobolev_norm(target, 0.0, None).max(1.0);
    Ok(RateResult::finish(control.energy(), residual, opt.tol, iterations, Some(control)))
}

/// Limited-memory BFGS with backtracking; every accepted step strictly
/// decreases `f`. Returns the number of accepted iterations.
fn lbfgs(
    x: &mut Vec<f64>,
    fg: impl Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    f: impl Fn(&[f64]) -> Result<f64>,
    max_iter: usize,
    memory: usize,
) -> Result<usize> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (mut fx, mut g) = fg(x)?;
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut accepted = 0;
    for _ in 0..max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= 1e-12 * fx.abs().max(1e-300) || gnorm == 0.0 {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut step = if hist.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let mut next = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let ft = f(&trial)?;
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope && ft < fx {
                next = Some(trial);
                break;
            }
            step *= 0.5;
        }
        let Some(trial) = next else { break };
        let (ft, gt) = fg(&trial)?;
        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > memory {
                hist.pop_front();
            }
        }
        let rel = (fx - ft) / fx.abs().max(1e-300);
        *x = trial;
        fx = ft;
        g = gt;
        accepted += 1;
        if rel < 1e-15 {
            break;
        }
    }
    Ok(accepted)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRateSettings {
    /// Feasibility tolerance on the per-node inversion residual relative to
    /// `max(1, max_n ‖ġ_n‖_H)`.
    pub tol: f64,
    /// Relative Tikhonov shift used when the Gram matrix is singular.
    pub ridge: f64,
}

impl Default for PathRateSettings {
    fn default() -> Self {
        PathRateSettings { tol: 1e-6, ridge: 1e-12 }
    }
}

/// Small-time rate of an explicit path `g`: per saved node solve
/// `σ(0, g_n) h_n ≈ ġ_n` in least squares, then `½∫‖h‖²` by the trapezoid
/// rule.
pub fn small_time_rate(path: &Trajectory, model: &NoiseModel, settings: PathRateSettings) -> Result<RateResult> {
    let (times, states) = (&path.times, &path.states);
    let n = times.len();
    if n < 2 || states.len() != n {
        return Err(Error::shape("path needs at least two saved states"));
    }
    let grid = *states[0].grid();
    if grid != model.grid {
        return Err(Error::shape("path and noise model live on different grids"));
    }
    let velocity = |i: usize| -> SpectralField {
        let (a, b) = match i {
            0 => (0, 1),
            i if i == n - 1 => (n - 2, n - 1),
            i => (i - 1, i + 1),
        };
        states[b].lin_comb(1.0, &states[a], -1.0).scaled(1.0 / (times[b] - times[a]))
    };
    let mut ws = SigmaWorkspace::new(grid);
    let k = model.trunc;
    let mut hs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    let mut vmax = 0.0f64;
    for (i, g) in states.iter().enumerate() {
        let v = velocity(i);
        vmax = vmax.max(sobolev_norm(&v, 0.0, None));
        let cols = ws.columns(model, 0.0, g)?;
        let gram = DMatrix::from_fn(k, k, |a, b| inner(&cols[a], &cols[b]));
        let rhs = DVector::from_fn(k, |a, _| inner(&cols[a], &v));
        let h = match gram.clone().cholesky().filter(|c| well_conditioned(c.l_dirty(), k)) {
            Some(ch) => ch.solve(&rhs),
            None => {
                log::warn!("singular Gram matrix at t = {}; using a ridge-regularized solve", times[i]);
                let shift = settings.ridge * gram.trace().max(f64::MIN_POSITIVE) / k as f64;
                let reg = &gram + DMatrix::identity(k, k) * shift;
                reg.cholesky().ok_or_else(|| Error::Invariant("regularized Gram matrix is not positive".into()))?.solve(&rhs)
            }
        };
        let mut fit = RawField::zeros(grid);
        for (c, hk) in cols.iter().zip(h.iter()) {
            fit.add_scaled(*hk, c);
        }
        fit.add_scaled(-1.0, &v);
        worst = worst.max(sobolev_norm(&fit, 0.0, None));
        hs.push(h.iter().copied().collect());
    }
    let mut value = 0.0;
    for i in 0..n - 1 {
        let dt = times[i + 1] - times[i];
        let e = |h: &[f64]| h.iter().map(|x| x * x).sum::<f64>();
        value += 0.25 * dt * (e(&hs[i]) + e(&hs[i + 1]));
    }
    let residual = worst / vmax.max(1.0);
    let dt_c = times[n - 1] / (n - 1) as f64;
    let control = Control::new(dt_c, hs).ok();
    Ok(RateResult::finish(value, residual, settings.tol, n, control))
}

fn well_conditioned(l: &DMatrix<f64>, k: usize) -> bool {
    let diag: Vec<f64> = (0..k).map(|i| l[(i, i)]).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > 1e-7 * max
}
