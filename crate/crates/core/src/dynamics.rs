//! Time stepping for the whole family of evolution equations
//!
//! ```text
//! du = a ∂₁²u dt − b B(u) dt + σ(ct, u) φ(t) dt + s σ(ct, u) dW
//! ```
//!
//! with `(a, b, s, c)` taken from an [`EquationSpec`]. The linear part is
//! integrated exactly (exponential integrating factor); advection and noise
//! are added before the factor (explicit Euler / Euler–Maruyama). The
//! control forcing, frozen over a step, is integrated against the exact
//! exponential, so constant controls on linear modes are reproduced exactly.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, SigmaWorkspace};
use crate::nonlinear::AdvectionWorkspace;
use crate::rate::Control;
use crate::spectral::{GridSpec, RawField, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Deterministic exponential Euler; any noise term is ignored.
    ExpEuler,
    #[default]
    ExpEulerMaruyama,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "one")]
    pub save_every: usize,
    /// Coefficient `ε` of an extra `ε²∂₂²` dissipation.
    #[serde(default)]
    pub reg_eps: f64,
    /// Rescale the state to this `H` norm whenever it is exceeded.
    #[serde(default)]
    pub clip_norm: Option<f64>,
}

fn one() -> usize {
    1
}

impl SolverConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        SolverConfig { dt, horizon, scheme: Scheme::default(), save_every: 1, reg_eps: 0.0, clip_norm: None }
    }

    pub fn with_save_every(mut self, save_every: usize) -> Self {
        self.save_every = save_every;
        self
    }

    /// Number of steps; the horizon must be an integer multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("time step {} must be positive", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::domain(format!("horizon {} must be at least dt = {}", self.horizon, self.dt)));
        }
        if self.save_every == 0 {
            return Err(Error::domain("save_every must be positive"));
        }
        if !(self.reg_eps >= 0.0) {
            return Err(Error::domain("reg_eps must be nonnegative"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::domain("clip_norm must be positive"));
            }
        }
        let n = (self.horizon / self.dt).round();
        if (n * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::domain(format!("horizon {} is not a multiple of dt = {}", self.horizon, self.dt)));
        }
        Ok(n as usize)
    }
}

/// Coefficients selecting one member of the equation family.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationSpec {
    pub drift_visc_scale: f64,
    pub drift_nl_scale: f64,
    pub noise_scale: f64,
    pub noise_time_scale: f64,
    pub control: Option<Control>,
    pub model: Option<Arc<NoiseModel>>,
    pub include_nonlinearity: bool,
}

impl EquationSpec {
    /// `du = ∂₁²u dt − B(u) dt`.
    pub fn deterministic() -> Self {
        EquationSpec {
            drift_visc_scale: 1.0,
            drift_nl_scale: 1.0,
            noise_scale: 0.0,
            noise_time_scale: 1.0,
            control: None,
            model: None,
            include_nonlinearity: true,
        }
    }

    /// `du = ∂₁²u dt − B(u) dt + σ(t,u) dW`.
    pub fn base(model: Arc<NoiseModel>) -> Self {
        EquationSpec { noise_scale: 1.0, model: Some(model), ..Self::deterministic() }
    }

    /// Small-noise equation with noise intensity `√ε`.
    pub fn small_noise(model: Arc<NoiseModel>, eps: f64) -> Self {
        EquationSpec { noise_scale: eps.sqrt(), ..Self::base(model) }
    }

    /// Controlled deterministic equation `dz = ∂₁²z − B(z) + σ(t,z)φ`.
    pub fn skeleton(model: Arc<NoiseModel>, control: Control) -> Self {
        EquationSpec { control: Some(control), model: Some(model), ..Self::deterministic() }
    }

    /// Controlled small-noise equation.
    pub fn controlled_small_noise(model: Arc<NoiseModel>, eps: f64, control: Control) -> Self {
        EquationSpec { control: Some(control), ..Self::small_noise(model, eps) }
    }

    /// `u_ε(t) = u(εt)` in law: all drift scaled by `ε`, noise by `√ε`, and
    /// `σ` evaluated at `εt`.
    pub fn small_time(model: Arc<NoiseModel>, eps: f64) -> Self {
        EquationSpec {
            drift_visc_scale: eps,
            drift_nl_scale: eps,
            noise_scale: eps.sqrt(),
            noise_time_scale: eps,
            ..Self::base(model)
        }
    }

    /// Drift-free comparison equation `v_ε(t) = u₀ + √ε ∫σ(εs, v_ε) dW`.
    pub fn driftless(model: Arc<NoiseModel>, eps: f64) -> Self {
        EquationSpec {
            drift_visc_scale: 0.0,
            drift_nl_scale: 0.0,
            include_nonlinearity: false,
            ..Self::small_time(model, eps)
        }
    }

    pub fn linear(mut self) -> Self {
        self.include_nonlinearity = false;
        self
    }

    fn validate(&self, grid: &GridSpec, horizon: f64) -> Result<()> {
        for (name, v) in [
            ("drift_visc_scale", self.drift_visc_scale),
            ("drift_nl_scale", self.drift_nl_scale),
            ("noise_scale", self.noise_scale),
            ("noise_time_scale", self.noise_time_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        if let Some(m) = &self.model {
            if &m.grid != grid {
                return Err(Error::shape("noise model and state live on different grids"));
            }
        }
        if let Some(c) = &self.control {
            let m = self.model.as_ref().ok_or_else(|| Error::domain("a control needs a noise model"))?;
            if c.width() < m.trunc {
                return Err(Error::shape(format!("control has {} coefficients, model needs {}", c.width(), m.trunc)));
            }
            if c.horizon() < horizon * (1.0 - 1e-12) {
                return Err(Error::domain(format!("control horizon {} shorter than {horizon}", c.horizon())));
            }
        }
        Ok(())
    }
}

/// Squared norms of one state, plus left-endpoint running integrals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    /// `‖u‖²_H`
    pub h2: f64,
    /// `‖∂₁u‖²_H`
    pub dx1_h2: f64,
    /// `‖∂₂u‖²_H`
    pub dx2_h2: f64,
    /// `‖u‖²_{H^{0,1}}`
    pub h01_2: f64,
    /// `‖u‖²_{H^{1,1}}`
    pub h11_2: f64,
    /// `∫₀^t ‖∂₁u‖²` (left endpoint rule on the step grid).
    pub int_dx1_h2: f64,
    /// `∫₀^t ‖u‖²_{H^{1,1}}` (left endpoint rule).
    pub int_h11_2: f64,
}

impl Diagnostics {
    pub fn of(u: &RawField, t: f64) -> Self {
        let mut d = Diagnostics { t, ..Default::default() };
        for ((k1, k2), c) in u.iter_modes() {
            let e = c[0].norm_sqr() + c[1].norm_sqr();
            if e == 0.0 {
                continue;
            }
            let (a, b) = ((k1 * k1) as f64, (k2 * k2) as f64);
            d.h2 += e;
            d.dx1_h2 += a * e;
            d.dx2_h2 += b * e;
            d.h01_2 += (1.0 + b) * e;
            d.h11_2 += (1.0 + a) * (1.0 + b) * e;
        }
        d
    }

    pub fn is_finite(&self) -> bool {
        self.h2.is_finite() && self.h11_2.is_finite()
    }
}

/// A realized path: saved states and per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Times of the saved states.
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    /// One row per time step, including `t = 0`.
    pub diagnostics: Vec<Diagnostics>,
}

impl Trajectory {
    /// Wraps an explicit path (every state saved); running integrals use
    /// the left endpoint rule on `times`.
    pub fn from_states(times: Vec<f64>, states: Vec<SpectralField>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::shape(format!("{} times for {} states", times.len(), states.len())));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("path times must start at 0 and increase"));
        }
        let mut diagnostics: Vec<Diagnostics> = Vec::with_capacity(times.len());
        for (i, (t, u)) in times.iter().zip(&states).enumerate() {
            let mut d = Diagnostics::of(u, *t);
            if i > 0 {
                let p = diagnostics[i - 1];
                d.int_dx1_h2 = p.int_dx1_h2 + (t - p.t) * p.dx1_h2;
                d.int_h11_2 = p.int_h11_2 + (t - p.t) * p.h11_2;
            }
            diagnostics.push(d);
        }
        Ok(Trajectory { times, states, diagnostics })
    }

    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        self.diagnostics.last().map_or(0.0, |d| d.t)
    }

    /// `sup_t ‖u(t)‖²_H` over the step grid.
    pub fn sup_h2(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.h2).fold(0.0, f64::max)
    }

    /// `‖u(T)‖² + 2a∫‖∂₁u‖² + 2r²∫‖∂₂u‖² − ‖u(0)‖²` relative to `‖u(0)‖²`,
    /// with the integrals taken by the trapezoid rule.
    pub fn energy_defect(&self, visc: f64, reg_eps: f64) -> f64 {
        let d = &self.diagnostics;
        let rate = |x: &Diagnostics| 2.0 * visc * x.dx1_h2 + 2.0 * reg_eps * reg_eps * x.dx2_h2;
        let diss: f64 = d.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (rate(&w[0]) + rate(&w[1]))).sum();
        let (first, last) = (d[0].h2, d[d.len() - 1].h2);
        (last + diss - first).abs() / first
    }

    /// CSV with header `t,H2,dx1H2,H01_2,H11_2`, one row per step.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,H2,dx1H2,H01_2,H11_2")?;
        for d in &self.diagnostics {
            writeln!(w, "{},{},{},{},{}", d.t, d.h2, d.dx1_h2, d.h01_2, d.h11_2)?;
        }
        Ok(())
    }
}

/// Threshold family for [`exit_time`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitMode {
    /// `‖u‖²_H > M` or `ε∫‖∂₁u‖² > M`.
    H,
    /// `‖u‖²_{H^{0,1}} > M` or `ε∫‖u‖²_{H^{1,1}} > M`.
    H01,
}

/// First step-grid time at which the threshold is exceeded, or the final
/// time if it never is.
pub fn exit_time(traj: &Trajectory, m: f64, eps: f64, mode: ExitMode) -> f64 {
    traj.diagnostics
        .iter()
        .find(|d| match mode {
            ExitMode::H => d.h2 > m || eps * d.int_dx1_h2 > m,
            ExitMode::H01 => d.h01_2 > m || eps * d.int_h11_2 > m,
        })
        .map_or(traj.final_time(), |d| d.t)
}

/// `(1 − e^{−λ dt}) / λ`, with the `λ → 0` limit `dt`.
pub(crate) fn exp_weight(lambda: f64, dt: f64) -> f64 {
    let x = lambda * dt;
    if x < 1e-8 {
        dt * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / lambda
    }
}

/// Reusable integrator for one equation on one grid; cheap to run many
/// times, so Monte Carlo loops keep one per worker.
#[derive(Debug)]
pub struct Solver {
    grid: GridSpec,
    spec: EquationSpec,
    cfg: SolverConfig,
    steps: usize,
    decay: Vec<f64>,
    /// `∫₀^dt e^{−λ(dt−s)} ds` per mode: the control forcing is integrated
    /// exactly over a step (frozen at the left endpoint).
    forcing_weight: Vec<f64>,
    forcing: Option<RawField>,
    /// Stream-function projection factors `(k₁, k₂)/|k|²`, zero off-band.
    proj: Vec<(f64, f64, f64)>,
    advection: Option<AdvectionWorkspace>,
    sigma: SigmaWorkspace,
    dw: Vec<f64>,
}

impl Solver {
    pub fn new(grid: GridSpec, spec: EquationSpec, cfg: SolverConfig) -> Result<Self> {
        grid.validate()?;
        let steps = cfg.steps()?;
        spec.validate(&grid, cfg.horizon)?;
        let mut decay = Vec::with_capacity(grid.len());
        let mut forcing_weight = Vec::with_capacity(grid.len());
        let mut proj = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let (k1, k2) = grid.wavenumber(idx);
            let (a, b) = (k1 as f64, k2 as f64);
            let rate = spec.drift_visc_scale * a * a + cfg.reg_eps * cfg.reg_eps * b * b;
            decay.push((-rate * cfg.dt).exp());
            forcing_weight.push(exp_weight(rate, cfg.dt));
            if grid.is_retained(k1, k2) && !grid.is_nyquist(idx) && (k1, k2) != (0, 0) {
                proj.push((a, b, 1.0 / (a * a + b * b)));
            } else {
                proj.push((0.0, 0.0, 0.0));
            }
        }
        let advection = (spec.include_nonlinearity && spec.drift_nl_scale != 0.0).then(|| AdvectionWorkspace::new(grid));
        let trunc = spec.model.as_ref().map_or(0, |m| m.trunc);
        let forcing = spec.control.is_some().then(|| RawField::zeros(grid));
        Ok(Solver {
            grid,
            spec,
            cfg,
            steps,
            decay,
            forcing_weight,
            forcing,
            proj,
            advection,
            sigma: SigmaWorkspace::new(grid),
            dw: vec![0.0; trunc],
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &EquationSpec {
        &self.spec
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn noisy(&self) -> bool {
        self.cfg.scheme == Scheme::ExpEulerMaruyama && self.spec.noise_scale != 0.0 && self.spec.model.is_some()
    }

    /// Advances `cur` from step `n` to `n + 1`, writing into `next`.
    fn step_into<R: Rng + ?Sized>(
        &mut self,
        n: usize,
        cur: &SpectralField,
        next: &mut RawField,
        rng: &mut R,
    ) -> Result<()> {
        let dt = self.cfg.dt;
        let t = n as f64 * dt;
        next.coeffs_mut().copy_from_slice(cur.coeffs());
        if let Some(adv) = self.advection.as_mut() {
            let b = adv.advect(cur, cur)?;
            next.add_scaled(-self.spec.drift_nl_scale * dt, &b);
        }
        let ts = self.spec.noise_time_scale * t;
        if let (Some(model), Some(control), Some(f)) = (&self.spec.model, &self.spec.control, self.forcing.as_mut()) {
            f.scale(0.0);
            self.sigma.add_apply(model, ts, cur, control.value_at(t), 1.0, f)?;
        }
        if self.noisy() {
            let model = self.spec.model.as_ref().expect("checked by noisy()");
            let sd = dt.sqrt();
            for w in &mut self.dw {
                *w = sd * rng.sample::<f64, _>(StandardNormal);
            }
            self.sigma.add_apply(model, ts, cur, &self.dw, self.spec.noise_scale, next)?;
        }
        let zero = Complex64::new(0.0, 0.0);
        let forcing = self.forcing.as_ref().map(RawField::coeffs);
        for (idx, c) in next.coeffs_mut().iter_mut().enumerate() {
            let (a, b, inv) = self.proj[idx];
            if inv == 0.0 {
                *c = [zero; 2];
                continue;
            }
            let mut s = (c[1] * a - c[0] * b) * (inv * self.decay[idx]);
            if let Some(f) = forcing {
                s += (f[idx][1] * a - f[idx][0] * b) * (inv * self.forcing_weight[idx]);
            }
            *c = [s * (-b), s * a];
        }
        if let Some(r) = self.cfg.clip_norm {
            let h = Diagnostics::of(next, 0.0).h2.sqrt();
            if h > r {
                next.scale(r / h);
            }
        }
        if !next.is_finite() {
            return Err(Error::BlowUp { time: t + dt, partial: None });
        }
        Ok(())
    }

    /// Integrates from `u0` over `[0, T]`.
    pub fn solve<R: Rng + ?Sized>(&mut self, u0: &SpectralField, rng: &mut R) -> Result<Trajectory> {
        self.solve_observed(u0, rng, |_, _| {})
    }

    /// As [`Solver::solve`], calling `observe(step, state)` after every step
    /// (and once for the initial state).
    pub fn solve_observed<R: Rng + ?Sized>(
        &mut self,
        u0: &SpectralField,
        rng: &mut R,
        mut observe: impl FnMut(usize, &SpectralField),
    ) -> Result<Trajectory> {
        if u0.grid() != &self.grid {
            return Err(Error::shape("initial state lives on a different grid"));
        }
        let dt = self.cfg.dt;
        let mut traj = Trajectory { times: vec![0.0], states: vec![u0.clone()], diagnostics: Vec::with_capacity(self.steps + 1) };
        traj.diagnostics.push(Diagnostics::of(u0, 0.0));
        observe(0, u0);
        let mut cur = u0.clone();
        let mut next = RawField::zeros(self.grid);
        for n in 0..self.steps {
            if let Err(e) = self.step_into(n, &cur, &mut next, rng) {
                return Err(match e {
                    Error::BlowUp { time, .. } => Error::BlowUp { time, partial: Some(Box::new(traj)) },
                    other => other,
                });
            }
            let t = (n + 1) as f64 * dt;
            let prev = traj.diagnostics[n];
            let mut d = Diagnostics::of(&next, t);
            d.int_dx1_h2 = prev.int_dx1_h2 + dt * prev.dx1_h2;
            d.int_h11_2 = prev.int_h11_2 + dt * prev.h11_2;
            if !d.is_finite() {
                return Err(Error::BlowUp { time: t, partial: Some(Box::new(traj)) });
            }
            traj.diagnostics.push(d);
            cur = SpectralField::from_raw_unchecked(std::mem::replace(&mut next, cur.into_raw()));
            observe(n + 1, &cur);
            if (n + 1) % self.cfg.save_every == 0 || n + 1 == self.steps {
                traj.times.push(t);
                traj.states.push(cur.clone());
            }
        }
        Ok(traj)
    }
}

/// One-shot [`Solver::solve`].
pub fn solve<R: Rng + ?Sized>(
    u0: &SpectralField,
    spec: EquationSpec,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    Solver::new(*u0.grid(), spec, cfg.clone())?.solve(u0, rng)
}

/// Skeleton equation driven by `phi`; deterministic.
pub fn solve_skeleton(u0: &SpectralField, model: Arc<NoiseModel>, phi: Control, cfg: &SolverConfig) -> Result<Trajectory> {
    // no noise term: the generator is never drawn from
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    solve(u0, EquationSpec::skeleton(model, phi), cfg, &mut rng)
}
