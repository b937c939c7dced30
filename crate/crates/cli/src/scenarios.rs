//! Scenario dispatch. Each scenario writes its artifacts into the output
//! directory and reports an optional pass/fail check.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anisoldp::dynamics::{solve, solve_skeleton, EquationSpec, Trajectory};
use anisoldp::experiments::{exp_equivalence_probe, mc_tail, small_time_scaling_check, EquationFamily, Event, LdpProbeSpec};
use anisoldp::noise::{assumption_samples, verify_assumptions, GMap, NoiseKind, NoiseModel, TimeProfile};
use anisoldp::random::random_solenoidal;
use anisoldp::rate::{lq_rate, minimize_small_noise_rate, small_time_rate, Control, OptimizerSettings, PathRateSettings, ScalarMode};
use anisoldp::spectral::{inner, sobolev_norm};
use anisoldp::{snapshot, GridSpec, SpectralField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    require, EventChoice, FamilyChoice, FieldConfig, FieldKind, GChoice, NoiseConfig, NoiseKindConfig, RunConfig, Scenario,
};
use crate::error::CliError;

/// Result of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub summary: Value,
    pub check: Option<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(passed: bool, detail: impl Into<String>) -> Option<Check> {
        Some(Check { passed, detail: detail.into() })
    }
}

/// Files written by a scenario, relative to the output directory.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Outputs { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(CliError::io(format!("creating {}", path.display())))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn write_with(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        body(&mut w).and_then(|_| w.flush()).map_err(CliError::io(format!("writing {name}")))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }

    fn snapshot(&mut self, name: &str, field: &SpectralField) -> Result<(), CliError> {
        let bytes = snapshot::encode(field);
        self.write_with(name, |w| w.write_all(&bytes))
    }
}

pub fn grid(cfg: &RunConfig) -> Result<GridSpec, CliError> {
    GridSpec::new(cfg.grid.n1, cfg.grid.n2.unwrap_or(cfg.grid.n1)).map_err(|e| CliError::Config(e.to_string()))
}

pub fn noise_model(nc: &NoiseConfig, grid: GridSpec) -> Result<NoiseModel, CliError> {
    let model = match nc.kind {
        NoiseKindConfig::Additive => {
            NoiseModel::default_additive(grid, require(nc.trunc, "noise.trunc")?, nc.hs.unwrap_or(1.0))?
        }
        NoiseKindConfig::SingleMode => {
            let mode = ScalarMode::new(grid, nc.k1.unwrap_or(1), require(nc.amplitude, "noise.amplitude")?)?;
            NoiseModel::clone(&mode.model)
        }
        NoiseKindConfig::Remark => {
            let offset = nc.g_offset.unwrap_or(1.0);
            let g = match nc.g.unwrap_or_default() {
                GChoice::BoundedSmooth => GMap::BoundedSmooth { offset },
                GChoice::IdentityClip => GMap::IdentityClip { radius: nc.g_radius.unwrap_or(1.0), offset },
            };
            NoiseModel::remark_example(grid, require(nc.trunc, "noise.trunc")?, nc.m_cap.unwrap_or(1.0), g)?
        }
        NoiseKindConfig::DerivativeFeedback => NoiseModel::derivative_feedback(grid, require(nc.scale, "noise.scale")?),
    };
    Ok(match (nc.time_amplitude, nc.time_frequency) {
        (None, None) => model,
        (a, w) => model.with_time_profile(TimeProfile::Sinusoid { amplitude: a.unwrap_or(0.0), frequency: w.unwrap_or(0.0) }),
    })
}

pub fn field(fc: &FieldConfig, grid: GridSpec) -> Result<SpectralField, CliError> {
    let amp = fc.amp.unwrap_or(1.0);
    let f = match fc.kind {
        FieldKind::Zero => SpectralField::zero(grid),
        FieldKind::VerticalShear => SpectralField::vertical_shear(grid, amp, fc.k.unwrap_or(1)),
        FieldKind::HorizontalShear => SpectralField::horizontal_shear(grid, amp, fc.k.unwrap_or(1)),
        FieldKind::UnitMode => {
            let (k1, k2) = (fc.k1.unwrap_or(1), fc.k2.unwrap_or(0));
            if (k1, k2) == (0, 0) || !grid.is_retained(k1, k2) {
                return Err(CliError::Config(format!("mode ({k1}, {k2}) is not resolved on the grid")));
            }
            SpectralField::unit_mode(grid, k1, k2, fc.phase.unwrap_or(0.0)).scaled(amp)
        }
        FieldKind::Random => random_solenoidal(grid, &mut ChaCha8Rng::seed_from_u64(fc.seed.unwrap_or(0)), amp),
        FieldKind::Snapshot => {
            let path = fc.path.as_ref().ok_or_else(|| CliError::Config("missing key `path`".into()))?;
            let f = snapshot::read(path)?;
            if f.grid().n1 != grid.n1 || f.grid().n2 != grid.n2 {
                return Err(CliError::Config(format!("snapshot {} does not match the grid", path.display())));
            }
            f
        }
    };
    f.check_invariants()?;
    Ok(f)
}

fn initial(cfg: &RunConfig, grid: GridSpec, default: FieldKind) -> Result<SpectralField, CliError> {
    let fallback = FieldConfig { kind: default, amp: None, k: None, k1: None, k2: None, phase: None, seed: None, path: None };
    field(cfg.initial.as_ref().unwrap_or(&fallback), grid)
}

fn model(cfg: &RunConfig, grid: GridSpec) -> Result<Arc<NoiseModel>, CliError> {
    let nc = cfg.noise.as_ref().ok_or_else(|| CliError::Config("missing key `noise`".into()))?;
    Ok(Arc::new(noise_model(nc, grid)?))
}

/// Runs the configured scenario.
pub fn execute(cfg: &RunConfig, out: &mut Outputs) -> Result<Outcome, CliError> {
    let grid = grid(cfg)?;
    cfg.solver.steps()?;
    match cfg.scenario {
        Scenario::DeterministicEnergy => deterministic_energy(cfg, grid, out),
        Scenario::ExactShear => exact_shear(cfg, grid, out),
        Scenario::Skeleton => skeleton(cfg, grid, out),
        Scenario::RateSmallNoise => rate_small_noise(cfg, grid, out),
        Scenario::RateSmallTime => rate_small_time(cfg, grid, out),
        Scenario::McTail => tail(cfg, grid, out),
        Scenario::ExpEquiv => exp_equiv(cfg, grid, out),
        Scenario::SmallTimeScaling => scaling(cfg, grid, out),
        Scenario::Assumptions => assumptions(cfg, grid, out),
    }
}

fn write_trajectory(out: &mut Outputs, traj: &Trajectory) -> Result<(), CliError> {
    out.write_with("diagnostics.csv", |w| traj.write_csv(w))?;
    out.snapshot("final.ansf", traj.final_state())
}

fn deterministic_energy(cfg: &RunConfig, grid: GridSpec, out: &mut Outputs) -> Result<Outcome, CliError> {
    let u0 = initial(cfg, grid, FieldKind::Random)?;
    let traj = solve(&u0, EquationSpec::deterministic(), &cfg.solver, &mut ChaCha8Rng::seed_from_u64(0))?;
    write_trajectory(out, &traj)?;
    let defect = traj.energy_defect(1.0, cfg.solver.reg_eps);
    let tol = cfg.deterministic_energy.as_ref().map_or(1e-3, |p| p.tol);
    Ok(Outcome {
        summary: json!({ "energy_defect": defect, "initial_h2": traj.diagnostics[0].h2, "final_h2": traj.diagnostics.last().map(|d| d.h2) }),
        check: Check::new(defect <= tol, format!("relative energy defect {defect:e} (limit {tol:e})")),
    })
}

fn exact_shear(cfg: &RunConfig, grid: GridSpec, out: &mut Outputs) -> Result<Outcome, CliError> {
    let p = cfg.exact_shear.clone().unwrap_or_default();
    if p.k <= 0 || !grid.is_retained(p.k, 0) {
        return Err(CliError::Config(format!("shear wavenumber {} is not resolved on the grid", p.k)));
    }
    let u0 = SpectralField::horizontal_shear(grid, p.amp, p.k);
    let traj = solve(&u0, EquationSpec::deterministic(), &cfg.solver, &mut ChaCha8Rng::seed_from_u64(0))?;
    let lambda = (p.k * p.k) as f64;
    let rows: Vec<(f64, f64, f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, u)| {
            let exact = u0.scaled((-lambda * t).exp());
            let err = sobolev_norm(&u.lin_comb(1.0, &exact, -1.0), 0.0, None);
            (t, inner(u, u), inner(&exact, &exact), err)
        })
        .collect();
    out.write_with("shear.csv", |w| {
        writeln!(w, "t,H2,exact_H2,error")?;
        for (t, h, e, err) in &rows {
            writeln!(w, "{t},{h},{e},{err}")?;
        }
        Ok(())
    })?;
    let final_err = rows.last().map_or(0.0, |r| r.3);
    Ok(Outcome {
        summary: json!({ "final_error": final_err }),
        check: Check::new(final_err <= p.tol, format!("final error {final_err:e} (limit {:e})", p.tol)),
    })
}

fn skeleton(cfg: &RunConfig, grid: GridSpec, out: &mut Outputs) -> Result<Outcome, CliError> {
    let p = cfg.skeleton.as_ref().expect("validated");
    let model = model(cfg, grid)?;
    let values = match (&p.values, &p.constant) {
        (Some(v), None) => v.clone(),
        (None, Some(c)) => vec![c.clone(); (cfg.solver.horizon / p.dt_c - 1e-9).ceil().max(1.0) as usize],
        (None, None) => return Err(CliError::Config("missing key `skeleton.values` or `skeleton.constant`".into())),
        (Some(_), Some(_)) => return Err(CliError::Config("`skeleton.values` and `skeleton.constant` are exclusive".into())),
    };
    let control = Control::new(p.dt_c, values)?;
    let u0 = initial(cfg, grid, FieldKind::Zero)?;
    let traj = solve_skeleton(&u0, model, control.clone(), &cfg.solver)?;
    write_trajectory(out, &traj)?;
    out.write_with("control.csv", |w| control.write_csv(w))?;
    Ok(Outcome {
        summary: json!({ "control_energy": control.energy(), "final_h2": traj.diagnostics.last().map(|d| d.h2) }),
        check: None,
    })
}

/// Coordinate of `u` along the single-mode template when `u` is an exact
/// multiple of it.
fn scalar_coordinate(mode: &ScalarMode, u: &SpectralField) -> Option<f64> {
    let z = mode.coordinate(u);
    let rest = sobolev_norm(&u.lin_comb(1.0, &mode.field(z), -1.0), 0.0, None);
    (rest <= 1e-12 * sobolev_norm(u, 0.0, None).max(1.0)).then_some(z)
}

fn single_mode(cfg: &RunConfig, grid: GridSpec) -> Option<ScalarMode> {
    let nc = cfg.noise.as_ref()?;
    if nc.kind != NoiseKindConfig::SingleMode || nc.time_amplitude.is_some_and(|a| a != 0.0) {
        return None;
    }
    ScalarMode::new(grid, nc.k1.unwrap_or(1), nc.amplitude?).ok()
}

fn rate_small_noise(cfg: &RunConfig, grid: GridSpec, out: &mut Outputs) -> Result<Outcome, CliError> {
    let p = cfg.rate_small_noise.as_ref().expect("validated");
    let model = model(cfg, grid)?;
    let u0 = initial(cfg, grid, FieldKind::Zero)?;
    let target = field(&p.target, grid)?;
    let defaults = OptimizerSettings::default();
    let opt = OptimizerSettings {
        dt_c: p.dt_c,
        penalties: p.penalties.clone().unwrap_or(defaults.penalties),
        max_iter: p.max_iter.unwrap_or(defaults.max_iter),
        tol: p.tol.unwrap_or(defaults.tol),
        gradient: p.gradient,
        linear: p.linear,
        ..defaults
    };
    let res = minimize_small_noise_rate(&u0, &target, model, &cfg.solver, &opt)?;
    out.json("rate.json", &res)?;
    if let Some(c) = &res.control {
        out.write_with("control.csv", |w| c.write_csv(w))?;
    }
    let reference = single_mode(cfg, grid).filter(|_| p.linear).and_then(|m| {
        let (a, b) = (scalar_coordinate(&m, &u0)?, scalar_coordinate(&m, &target)?);
        Some(lq_rate(m.lambda, m.amplitude, a, b, cfg.solver.horizon))
    });
    Ok(Outcome {
        summary: json!({ "value": res.value, "feasible": res.feasible, "residual": res.residual, "reference": reference }),
        check: Check::new(res.feasible, format!("residual {:e} (tolerance {:e})", res.residual, opt.tol)),
    })
}

fn rate_small_time(cfg: &RunConfig, grid: GridSpec, out: &mut Outputs) -> Result<Outcome, CliError> {
    let p = cfg.rate_small_time.as_ref().expect("validated");
    let model = model(cfg, grid)?;
    let NoiseKind::Additive { templates } = &model.kind else {
        return Err(CliError::Config("rate-small-time paths are built from additive templates".into()));
    };
    let tpl = templates
        .get(p.template)
        .ok_or_else(|| CliError::Config(format!("template {} out of range (have {})", p.template, templates.len())))?;
    let u0 = initial(cfg, grid, FieldKind::Zero)?;
    let steps = cfg.solver.steps()?;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * cfg.solver.dt).collect();
    let states = times.iter().map(|&t| u0.lin_comb(1.0, tpl, p.speed * t)).collect();
    let path = Trajectory::from_states(times, states)?;
    let settings = PathRateSettings { tol: p.tol.unwrap_or(PathRateSettings::default().tol), ..Default::default() };
    let res = small_time_rate(&path, &model, settings)?;
    out.json("rate.json", &res)?;
    if let Some(c) = &res.control {
        out.write_with("control.csv", |w| c.write_csv(w))?;
    }
    let reference = 0.5 * p.speed * p.speed * cfg.solver.horizon;
    let ok = res.feasible && (res.value - reference).abs() <= 1e-8 * reference.max(1.0);
    Ok(Outcome {
        summary: json!({ "value": res.value, "feasible": res.feasible, "residual": res.residual, "reference": reference }),
        check: Check::new(ok, format!("rate {} against ½·speed²·T = {reference}", res.value)),
    })
}

fn tail(cfg: &RunConfig, grid: GridSpec, out: &mut Outputs) -> Result<Outcome, CliError> {
    let p = cfg.mc_tail.as_ref().expect("validated");
    let model = model(cfg, grid)?;
    let family = match p.family {
        FamilyChoice::SmallNoise => EquationFamily::SmallNoise { model, linear: p.linear },
        FamilyChoice::SmallTime => EquationFamily::SmallTime { model },
        FamilyChoice::Driftless => EquationFamily::Driftless { model },
    };
    let event = match p.event {
        EventChoice::TerminalNorm => Event::TerminalNormExceeds(require(p.r, "mc_tail.r")?),
        EventChoice::SupDeviation => {
            Event::SupDeviationFromSkeleton { control: None, delta: require(p.delta, "mc_tail.delta")? }
        }
    };
    let u0 = initial(cfg, grid, FieldKind::Zero)?;
    let spec = LdpProbeSpec { eps_ladder: p.eps.clone(), n_samples: p.n.clone(), event: event.clone(), base_seed: cfg.seed };
    let mut res = mc_tail(&spec, &u0, &family, &cfg.solver)?;
    res.reference = match (single_mode(cfg, grid), &event, p.family) {
        (Some(m), Event::TerminalNormExceeds(r), FamilyChoice::SmallNoise) if p.linear => scalar_coordinate(&m, &u0)
            .map(|a| {
                let t = cfg.solver.horizon;
                -lq_rate(m.lambda, m.amplitude, a, *r, t).min(lq_rate(m.lambda, m.amplitude, a, -r, t))
            }),
        _ => None,
    };
    out.write_with("probe.csv", |w| res.write_csv(w))?;
    out.json("probe.json", &res)?;
    let check = res.reference.and_then(|reference| {
        let last = res.rows.last()?;
        let gap = ((last.eps_log_p - reference) / reference).abs();
        Check::new(!last.censored && gap <= p.gap_tol, format!("relative gap {gap:.4} to {reference} (limit {})", p.gap_tol))
    });
    Ok(Outcome { summary: serde_json::to_value(&res).expect("serializable"), check })
}

fn exp_equiv(cfg: &RunConfig, grid: GridSpec, out: &mut Outputs) -> Result<Outcome, CliError> {
    let p = cfg.exp_equiv.as_ref().expect("validated");
    let model = model(cfg, grid)?;
    let u0 = initial(cfg, grid, FieldKind::VerticalShear)?;
    let spec = LdpProbeSpec {
        eps_ladder: p.eps.clone(),
        n_samples: p.n.clone(),
        event: Event::SupPairDeviation(p.delta),
        base_seed: cfg.seed,
    };
    let res = exp_equivalence_probe(&u0, model, p.delta, &spec, &cfg.solver)?;
    out.write_with("probe.csv", |w| res.write_csv(w))?;
    out.json("probe.json", &res)?;
    let ok = res.strictly_decreasing(p.trend_k);
    Ok(Outcome {
        summary: serde_json::to_value(&res).expect("serializable"),
        check: Check::new(ok, format!("ε·log P̂ decreasing by more than {} standard errors", p.trend_k)),
    })
}

fn scaling(cfg: &RunConfig, grid: GridSpec, out: &mut Outputs) -> Result<Outcome, CliError> {
    let p = cfg.small_time_scaling.as_ref().expect("validated");
    let model = model(cfg, grid)?;
    if !model.is_time_homogeneous() {
        return Err(CliError::Config("the scaling law needs a time-homogeneous noise model".into()));
    }
    let u0 = initial(cfg, grid, FieldKind::Zero)?;
    let res = small_time_scaling_check(&u0, model, p.eps, p.n, &cfg.solver, cfg.seed)?;
    out.json("scaling.json", &res)?;
    out.write_with("scaling.csv", |w| {
        writeln!(w, "functional,z_mean,z_second")?;
        for (i, (a, b)) in res.z_mean.iter().zip(&res.z_second).enumerate() {
            writeln!(w, "{i},{a},{b}")?;
        }
        Ok(())
    })?;
    Ok(Outcome {
        summary: serde_json::to_value(&res).expect("serializable"),
        check: Check::new(res.max_abs_z <= p.z_max, format!("max |z| = {:.3} (limit {})", res.max_abs_z, p.z_max)),
    })
}

fn assumptions(cfg: &RunConfig, grid: GridSpec, out: &mut Outputs) -> Result<Outcome, CliError> {
    let p = cfg.assumptions.clone().unwrap_or_default();
    let model = model(cfg, grid)?;
    let pairs = assumption_samples(grid, p.samples, p.sample_seed);
    let report = verify_assumptions(&model, &pairs, &p.dt_grid)?;
    out.json("assumptions.json", &report)?;
    Ok(Outcome {
        summary: serde_json::to_value(&report).expect("serializable"),
        check: Check::new(
            report.thresholds_pass,
            format!("K2 = {:.3e}, K2_tilde = {:.3e}, L2 = {:.3e}", report.k2, report.k2_tilde, report.l2),
        ),
    })
}
