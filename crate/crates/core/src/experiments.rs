//! Plain Monte Carlo probes of the large-deviation statements: tail
//! probabilities along an `ε` ladder, exponential equivalence of the
//! small-time equation and its drift-free comparison, energy-functional
//! statistics and the small-time scaling law.
//!
//! Sample `i` at ladder position `j` always draws from
//! `sample_rng(base_seed, j, i)`, and results are aggregated by index, so
//! outputs do not depend on the number of worker threads.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{exit_time, EquationSpec, ExitMode, Solver, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::rate::Control;
use crate::seed::sample_rng;
use crate::spectral::{inner, sobolev_norm, SpectralField};
use crate::stats::{two_sample_z, wilson_std_error, Moments};

/// Events whose probability is estimated. Deviations are squared `H` norms.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// `‖u(T)‖_H > r`.
    TerminalNormExceeds(f64),
    /// `sup_t ‖u(t) − z^φ(t)‖²_H > δ` with `z^φ` the skeleton path of the
    /// same family (`φ = 0` when no control is given).
    SupDeviationFromSkeleton { control: Option<Control>, delta: f64 },
    /// `sup_t ‖u_ε(t) − v_ε(t)‖²_H > δ` for the coupled pair of
    /// [`exp_equivalence_probe`].
    SupPairDeviation(f64),
}

/// Maps `ε` to one member of the equation family.
#[derive(Debug, Clone)]
pub enum EquationFamily {
    /// Noise intensity `√ε`, unit drift.
    SmallNoise { model: Arc<NoiseModel>, linear: bool },
    /// Small-noise equation driven additionally by a control.
    ControlledSmallNoise { model: Arc<NoiseModel>, control: Control, linear: bool },
    /// Time-rescaled equation `u_ε(t) = u(εt)`.
    SmallTime { model: Arc<NoiseModel> },
    /// Drift-free comparison equation.
    Driftless { model: Arc<NoiseModel> },
}

impl EquationFamily {
    pub fn spec(&self, eps: f64) -> EquationSpec {
        let lin = |s: EquationSpec, linear: bool| if linear { s.linear() } else { s };
        match self {
            EquationFamily::SmallNoise { model, linear } => lin(EquationSpec::small_noise(model.clone(), eps), *linear),
            EquationFamily::ControlledSmallNoise { model, control, linear } => {
                lin(EquationSpec::controlled_small_noise(model.clone(), eps, control.clone()), *linear)
            }
            EquationFamily::SmallTime { model } => EquationSpec::small_time(model.clone(), eps),
            EquationFamily::Driftless { model } => EquationSpec::driftless(model.clone(), eps),
        }
    }

    fn model(&self) -> &Arc<NoiseModel> {
        match self {
            EquationFamily::SmallNoise { model, .. }
            | EquationFamily::ControlledSmallNoise { model, .. }
            | EquationFamily::SmallTime { model }
            | EquationFamily::Driftless { model } => model,
        }
    }

    fn linear(&self) -> bool {
        match self {
            EquationFamily::SmallNoise { linear, .. } | EquationFamily::ControlledSmallNoise { linear, .. } => *linear,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpProbeSpec {
    pub eps_ladder: Vec<f64>,
    /// Samples per ladder entry; a single entry applies to all.
    pub n_samples: Vec<usize>,
    pub event: Event,
    pub base_seed: u64,
}

impl LdpProbeSpec {
    pub const MIN_SAMPLES: usize = 100;

    fn validate(&self) -> Result<()> {
        if self.eps_ladder.is_empty() {
            return Err(Error::domain("empty epsilon ladder"));
        }
        if self.eps_ladder.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::domain("epsilon values must be positive"));
        }
        if self.eps_ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::domain("epsilon ladder must be strictly decreasing"));
        }
        if self.n_samples.len() != 1 && self.n_samples.len() != self.eps_ladder.len() {
            return Err(Error::shape(format!(
                "{} sample counts for {} ladder entries",
                self.n_samples.len(),
                self.eps_ladder.len()
            )));
        }
        if self.n_samples.iter().any(|&n| n < Self::MIN_SAMPLES) {
            return Err(Error::Sampling(format!("need at least {} samples per epsilon", Self::MIN_SAMPLES)));
        }
        Ok(())
    }

    pub fn samples_at(&self, j: usize) -> usize {
        if self.n_samples.len() == 1 {
            self.n_samples[0]
        } else {
            self.n_samples[j]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub eps: f64,
    pub n: usize,
    pub hits: usize,
    pub p_hat: f64,
    /// `ε log P̂`, or the upper bound `ε log(1/n)` when censored.
    pub eps_log_p: f64,
    /// Wilson standard error of `P̂`.
    pub stderr: f64,
    pub censored: bool,
}

impl ProbeRow {
    pub fn new(eps: f64, n: usize, hits: usize) -> Self {
        let p_hat = hits as f64 / n as f64;
        let censored = hits == 0;
        let eps_log_p = if censored { -eps * (n as f64).ln() } else { eps * p_hat.ln() };
        ProbeRow { eps, n, hits, p_hat, eps_log_p, stderr: wilson_std_error(hits, n), censored }
    }

    /// Delta-method standard error of `ε log P̂`; infinite when censored.
    pub fn eps_log_p_stderr(&self) -> f64 {
        if self.censored {
            f64::INFINITY
        } else {
            self.eps * self.stderr / self.p_hat
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub rows: Vec<ProbeRow>,
    pub reference: Option<f64>,
}

impl ProbeResult {
    /// CSV with header `eps,n,hits,p_hat,eps_log_p,stderr,censored`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "eps,n,hits,p_hat,eps_log_p,stderr,censored")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{},{}", r.eps, r.n, r.hits, r.p_hat, r.eps_log_p, r.stderr, r.censored)?;
        }
        Ok(())
    }

    /// `ε log P̂` strictly decreases along the ladder with every consecutive
    /// gap larger than `k` combined standard errors. Censored rows count as
    /// lying at their upper bound with zero error.
    pub fn strictly_decreasing(&self, k: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let se = |r: &ProbeRow| if r.censored { 0.0 } else { r.eps_log_p_stderr() };
            let gap = w[0].eps_log_p - w[1].eps_log_p;
            gap > k * (se(&w[0]).powi(2) + se(&w[1]).powi(2)).sqrt()
        })
    }
}

fn per_worker_solver(u0: &SpectralField, spec: EquationSpec, cfg: &SolverConfig) -> Result<Solver> {
    let mut cfg = cfg.clone();
    cfg.save_every = usize::MAX;
    Solver::new(*u0.grid(), spec, cfg)
}

/// Estimates the probability of `spec.event` for every `ε` in the ladder.
pub fn mc_tail(spec: &LdpProbeSpec, u0: &SpectralField, family: &EquationFamily, cfg: &SolverConfig) -> Result<ProbeResult> {
    spec.validate()?;
    let skeleton: Option<(Vec<SpectralField>, f64)> = match &spec.event {
        Event::TerminalNormExceeds(r) if !(*r >= 0.0) => return Err(Error::domain("threshold must be nonnegative")),
        Event::TerminalNormExceeds(_) => None,
        Event::SupDeviationFromSkeleton { control, delta } => {
            let model = family.model().clone();
            let control = match control {
                Some(c) => c.clone(),
                None => Control::zeros(cfg.horizon, 1, model.trunc)?,
            };
            let mut sk = EquationSpec::skeleton(model, control);
            sk.include_nonlinearity = !family.linear();
            let mut scfg = cfg.clone();
            scfg.save_every = 1;
            let mut rng = sample_rng(spec.base_seed, u64::MAX, 0);
            let traj = Solver::new(*u0.grid(), sk, scfg)?.solve(u0, &mut rng)?;
            Some((traj.states, *delta))
        }
        Event::SupPairDeviation(_) => {
            return Err(Error::domain("pair deviations are estimated by exp_equivalence_probe"));
        }
    };

    let mut rows = Vec::with_capacity(spec.eps_ladder.len());
    for (j, &eps) in spec.eps_ladder.iter().enumerate() {
        let n = spec.samples_at(j);
        let eq = family.spec(eps);
        Solver::new(*u0.grid(), eq.clone(), cfg.clone())?;
        let hits = match (&spec.event, &skeleton) {
            (Event::TerminalNormExceeds(r), _) => {
                let r = *r;
                let hits = (0..n)
                    .into_par_iter()
                    .map_init(
                        || per_worker_solver(u0, eq.clone(), cfg).expect("validated above"),
                        |solver, i| -> Result<bool> {
                            let mut rng = sample_rng(spec.base_seed, j as u64, i as u64);
                            let traj = solver.solve(u0, &mut rng)?;
                            Ok(sobolev_norm(traj.final_state(), 0.0, None) > r)
                        },
                    )
                    .collect::<Result<Vec<bool>>>()?;
                hits.into_iter().filter(|&h| h).count()
            }
            (Event::SupDeviationFromSkeleton { .. }, Some((path, delta))) => {
                let delta = *delta;
                let hits = (0..n)
                    .into_par_iter()
                    .map_init(
                        || per_worker_solver(u0, eq.clone(), cfg).expect("validated above"),
                        |solver, i| -> Result<bool> {
                            let mut rng = sample_rng(spec.base_seed, j as u64, i as u64);
                            let mut sup = 0.0f64;
                            solver.solve_observed(u0, &mut rng, |step, u| {
                                let d = u.lin_comb(1.0, &path[step], -1.0);
                                sup = sup.max(inner(&d, &d));
                            })?;
                            Ok(sup > delta)
                        },
                    )
                    .collect::<Result<Vec<bool>>>()?;
                hits.into_iter().filter(|&h| h).count()
            }
            _ => unreachable!("event checked above"),
        };
        rows.push(ProbeRow::new(eps, n, hits));
    }
    Ok(ProbeResult { rows, reference: None })
}

/// `sup_t ‖u_ε(t) − v_ε(t)‖²_H` for one coupled sample: both equations are
/// driven by the same Brownian increments.
pub fn coupled_sup_deviation(
    u_solver: &mut Solver,
    v_solver: &mut Solver,
    u0: &SpectralField,
    seed: (u64, u64, u64),
) -> Result<f64> {
    let mut path = Vec::with_capacity(u_solver.steps() + 1);
    let mut rng = sample_rng(seed.0, seed.1, seed.2);
    u_solver.solve_observed(u0, &mut rng, |_, u| path.push(u.clone()))?;
    let mut rng = sample_rng(seed.0, seed.1, seed.2);
    let mut sup = 0.0f64;
    v_solver.solve_observed(u0, &mut rng, |step, v| {
        let d = path[step].lin_comb(1.0, v, -1.0);
        sup = sup.max(inner(&d, &d));
    })?;
    Ok(sup)
}

/// Estimates `P(sup_t ‖u_ε − v_ε‖²_H > δ)` along the ladder, where `u_ε`
/// solves the time-rescaled equation and `v_ε` the drift-free one with the
/// same noise. `spec.event` is ignored in favour of `delta`.
pub fn exp_equivalence_probe(
    u0: &SpectralField,
    model: Arc<NoiseModel>,
    delta: f64,
    spec: &LdpProbeSpec,
    cfg: &SolverConfig,
) -> Result<ProbeResult> {
    spec.validate()?;
    if !(delta > 0.0) {
        return Err(Error::domain("deviation threshold must be positive"));
    }
    let mut rows = Vec::with_capacity(spec.eps_ladder.len());
    for (j, &eps) in spec.eps_ladder.iter().enumerate() {
        let n = spec.samples_at(j);
        let u_eq = EquationSpec::small_time(model.clone(), eps);
        let v_eq = EquationSpec::driftless(model.clone(), eps);
        per_worker_solver(u0, u_eq.clone(), cfg)?;
        per_worker_solver(u0, v_eq.clone(), cfg)?;
        let hits = (0..n)
            .into_par_iter()
            .map_init(
                || {
                    (
                        per_worker_solver(u0, u_eq.clone(), cfg).expect("validated above"),
                        per_worker_solver(u0, v_eq.clone(), cfg).expect("validated above"),
                    )
                },
                |(us, vs), i| -> Result<bool> {
                    Ok(coupled_sup_deviation(us, vs, u0, (spec.base_seed, j as u64, i as u64))? > delta)
                },
            )
            .collect::<Result<Vec<bool>>>()?;
        rows.push(ProbeRow::new(eps, n, hits.into_iter().filter(|&h| h).count()));
    }
    Ok(ProbeResult { rows, reference: None })
}

/// Runs `n` independent paths of one equation (stream `stream`).
pub fn simulate_ensemble(
    u0: &SpectralField,
    spec: EquationSpec,
    cfg: &SolverConfig,
    n: usize,
    base_seed: u64,
    stream: u64,
) -> Result<Vec<Trajectory>> {
    Solver::new(*u0.grid(), spec.clone(), cfg.clone())?;
    (0..n)
        .into_par_iter()
        .map_init(
            || Solver::new(*u0.grid(), spec.clone(), cfg.clone()).expect("validated above"),
            |solver, i| solver.solve(u0, &mut sample_rng(base_seed, stream, i as u64)),
        )
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub m: f64,
    pub p_hat: f64,
    pub eps_log_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub eps: f64,
    /// `F(T) = sup_{s≤T} ‖u(s)‖²_H + ε∫₀^T ‖∂₁u‖²` per path.
    pub f_values: Vec<f64>,
    /// `G(τ) = sup_{s≤τ} ‖u(s)‖²_{H^{0,1}} + ε∫₀^τ ‖u‖²_{H^{1,1}}` at the
    /// exit time `τ` of level `m1`.
    pub g_values: Vec<f64>,
    /// `P̂(F > M)` for each `M` of the grid.
    pub rows: Vec<EnergyRow>,
}

/// `F` at the final time of `traj`.
pub fn energy_functional(traj: &Trajectory, eps: f64) -> f64 {
    let last = traj.diagnostics.last().expect("nonempty trajectory");
    traj.sup_h2() + eps * last.int_dx1_h2
}

/// `G` evaluated up to time `tau`.
pub fn g_functional(traj: &Trajectory, eps: f64, tau: f64) -> f64 {
    let upto = traj.diagnostics.iter().take_while(|d| d.t <= tau);
    let (mut sup, mut int) = (0.0f64, 0.0);
    for d in upto {
        sup = sup.max(d.h01_2);
        int = d.int_h11_2;
    }
    sup + eps * int
}

/// Empirical tail of the energy functionals over an ensemble.
pub fn energy_stats(ensemble: &[Trajectory], eps: f64, m_grid: &[f64], m1: f64) -> EnergySummary {
    let f_values: Vec<f64> = ensemble.iter().map(|t| energy_functional(t, eps)).collect();
    let g_values: Vec<f64> =
        ensemble.iter().map(|t| g_functional(t, eps, exit_time(t, m1, eps, ExitMode::H))).collect();
    let n = f_values.len().max(1) as f64;
    let rows = m_grid
        .iter()
        .map(|&m| {
            let p = f_values.iter().filter(|&&f| f > m).count() as f64 / n;
            EnergyRow { m, p_hat: p, eps_log_p: eps * p.ln() }
        })
        .collect();
    EnergySummary { eps, f_values, g_values, rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub eps: f64,
    pub n: usize,
    /// Two-sample z statistics for the means of the test functionals.
    pub z_mean: Vec<f64>,
    /// Same for their second moments.
    pub z_second: Vec<f64>,
    pub max_abs_z: f64,
}

/// Test functionals `⟨u, e_m⟩` for eight fixed low modes.
pub fn scaling_test_fields(grid: crate::GridSpec) -> Vec<SpectralField> {
    [(1, 0), (0, 1), (1, 1), (1, -1), (2, 0), (0, 2), (2, 1), (1, 2)]
        .iter()
        .map(|&(k1, k2)| SpectralField::unit_mode(grid, k1, k2, 0.0))
        .collect()
}

/// Compares `u(εT)` from the base equation (step `ε·dt`, stream 0) with
/// `u_ε(T)` from the time-rescaled equation (step `dt`, stream 1).
pub fn small_time_scaling_check(
    u0: &SpectralField,
    model: Arc<NoiseModel>,
    eps: f64,
    n: usize,
    cfg: &SolverConfig,
    base_seed: u64,
) -> Result<ScalingSummary> {
    if !(eps > 0.0) || n < 2 {
        return Err(Error::domain("need eps > 0 and at least two samples"));
    }
    let mut base_cfg = cfg.clone();
    base_cfg.dt = eps * cfg.dt;
    base_cfg.horizon = eps * cfg.horizon;
    base_cfg.save_every = usize::MAX;
    let mut small_cfg = cfg.clone();
    small_cfg.save_every = usize::MAX;
    let tests = scaling_test_fields(*u0.grid());
    let project = |traj: Trajectory| -> Vec<f64> { tests.iter().map(|e| inner(traj.final_state(), e)).collect() };
    let a: Vec<Vec<f64>> =
        simulate_ensemble(u0, EquationSpec::base(model.clone()), &base_cfg, n, base_seed, 0)?.into_iter().map(project).collect();
    let b: Vec<Vec<f64>> =
        simulate_ensemble(u0, EquationSpec::small_time(model, eps), &small_cfg, n, base_seed, 1)?.into_iter().map(project).collect();
    let mut z_mean = Vec::with_capacity(tests.len());
    let mut z_second = Vec::with_capacity(tests.len());
    for m in 0..tests.len() {
        let ma = Moments::from_slice(&a.iter().map(|x| x[m]).collect::<Vec<_>>());
        let mb = Moments::from_slice(&b.iter().map(|x| x[m]).collect::<Vec<_>>());
        z_mean.push(two_sample_z(&ma, &mb));
        let sa = Moments::from_slice(&a.iter().map(|x| x[m] * x[m]).collect::<Vec<_>>());
        let sb = Moments::from_slice(&b.iter().map(|x| x[m] * x[m]).collect::<Vec<_>>());
        z_second.push(two_sample_z(&sa, &sb));
    }
    let max_abs_z = z_mean.iter().chain(&z_second).map(|z| z.abs()).fold(0.0, f64::max);
    Ok(ScalingSummary { eps, n, z_mean, z_second, max_abs_z })
}
