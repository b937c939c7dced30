//! Run configuration: one TOML file with flat sections. Unknown keys are
//! collected and rejected all at once.

use std::path::PathBuf;

use anisoldp::dynamics::SolverConfig;
use anisoldp::rate::GradientMode;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    DeterministicEnergy,
    ExactShear,
    Skeleton,
    RateSmallNoise,
    RateSmallTime,
    McTail,
    ExpEquiv,
    SmallTimeScaling,
    Assumptions,
}

impl Scenario {
    /// Whether outputs depend on the run seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Scenario::McTail | Scenario::ExpEquiv | Scenario::SmallTimeScaling)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for Monte Carlo loops; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deterministic_energy: Option<EnergyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_shear: Option<ShearParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<SkeletonParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_small_noise: Option<RateSmallNoiseParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_small_time: Option<RateSmallTimeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_tail: Option<McTailParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp_equiv: Option<ExpEquivParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small_time_scaling: Option<ScalingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n1: usize,
    /// Defaults to `n1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKindConfig {
    /// Low-mode templates with amplitudes `∝ 1/|k|`; keys `trunc`, `hs`.
    Additive,
    /// One horizontal-shear template; keys `k1`, `amplitude`.
    SingleMode,
    /// Multiplicative example; keys `trunc`, `m_cap`, `g`.
    Remark,
    /// `σ(u)y = scale·y₀·∂₁u`; key `scale`.
    DerivativeFeedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GChoice {
    #[default]
    BoundedSmooth,
    IdentityClip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub kind: NoiseKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<GChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// `1 + a·sin(ωt)` time modulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_frequency: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Zero,
    /// `(amp·sin(k x₂), 0)`.
    VerticalShear,
    /// `(0, amp·sin(k x₁))`.
    HorizontalShear,
    /// `amp` times the unit mode at `(k1, k2)` with `phase`.
    UnitMode,
    /// Random divergence-free field of `H` norm `amp` drawn from `seed`.
    Random,
    /// Snapshot file in the ANSF format.
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Largest accepted relative energy defect.
    #[serde(default = "default_energy_tol")]
    pub tol: f64,
}

fn default_energy_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearParams {
    #[serde(default = "unit")]
    pub amp: f64,
    #[serde(default = "unit_k")]
    pub k: i64,
    #[serde(default = "default_shear_tol")]
    pub tol: f64,
}

impl Default for ShearParams {
    fn default() -> Self {
        ShearParams { amp: 1.0, k: 1, tol: default_shear_tol() }
    }
}

fn unit() -> f64 {
    1.0
}

fn unit_k() -> i64 {
    1
}

fn default_shear_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonParams {
    pub dt_c: f64,
    /// Per-node coefficients; mutually exclusive with `constant`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Vec<f64>>>,
    /// One coefficient vector applied on the whole horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSmallNoiseParams {
    pub target: FieldConfig,
    #[serde(default = "default_dt_c")]
    pub dt_c: f64,
    #[serde(default)]
    pub linear: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalties: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default)]
    pub gradient: GradientMode,
}

fn default_dt_c() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSmallTimeParams {
    /// Straight path `u₀ + t·speed·template`.
    #[serde(default)]
    pub template: usize,
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyChoice {
    SmallNoise,
    SmallTime,
    Driftless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventChoice {
    /// `‖u(T)‖_H > r`.
    TerminalNorm,
    /// `sup_t ‖u − z⁰‖²_H > delta` against the uncontrolled skeleton.
    SupDeviation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTailParams {
    pub family: FamilyChoice,
    #[serde(default)]
    pub linear: bool,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub event: EventChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Largest accepted relative gap to the LQ reference at the last `ε`.
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
}

fn default_gap_tol() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpEquivParams {
    pub delta: f64,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    /// Standard errors required between consecutive ladder rows.
    #[serde(default = "default_trend_k")]
    pub trend_k: f64,
}

fn default_trend_k() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub eps: f64,
    pub n: usize,
    #[serde(default = "default_z_max")]
    pub z_max: f64,
}

fn default_z_max() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionParams {
    #[serde(default = "default_assumption_samples")]
    pub samples: usize,
    #[serde(default = "default_dt_grid")]
    pub dt_grid: Vec<f64>,
    #[serde(default)]
    pub sample_seed: u64,
}

impl Default for AssumptionParams {
    fn default() -> Self {
        AssumptionParams { samples: default_assumption_samples(), dt_grid: default_dt_grid(), sample_seed: 0 }
    }
}

fn default_assumption_samples() -> usize {
    120
}

fn default_dt_grid() -> Vec<f64> {
    vec![0.01, 0.1, 0.5]
}

impl RunConfig {
    /// Parses a config, rejecting every unknown key.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut unknown = Vec::new();
        let cfg: RunConfig = serde_ignored::deserialize(de, |path| {
            // optional sections show up as a `?` segment
            let key: Vec<String> = path.to_string().split('.').filter(|s| *s != "?").map(str::to_string).collect();
            unknown.push(key.join("."))
        })
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !unknown.is_empty() {
            return Err(CliError::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Checks that the section the scenario needs is present.
    fn validate(&self) -> Result<(), CliError> {
        let needs = |present: bool, key: &str| {
            if present {
                Ok(())
            } else {
                Err(CliError::Config(format!("missing key `{key}` for scenario {:?}", self.scenario)))
            }
        };
        match self.scenario {
            Scenario::DeterministicEnergy | Scenario::ExactShear => Ok(()),
            Scenario::Skeleton => needs(self.noise.is_some(), "noise").and(needs(self.skeleton.is_some(), "skeleton")),
            Scenario::RateSmallNoise => {
                needs(self.noise.is_some(), "noise").and(needs(self.rate_small_noise.is_some(), "rate_small_noise"))
            }
            Scenario::RateSmallTime => {
                needs(self.noise.is_some(), "noise").and(needs(self.rate_small_time.is_some(), "rate_small_time"))
            }
            Scenario::McTail => needs(self.noise.is_some(), "noise").and(needs(self.mc_tail.is_some(), "mc_tail")),
            Scenario::ExpEquiv => needs(self.noise.is_some(), "noise").and(needs(self.exp_equiv.is_some(), "exp_equiv")),
            Scenario::SmallTimeScaling => needs(self.noise.is_some(), "noise")
                .and(needs(self.small_time_scaling.is_some(), "small_time_scaling")),
            Scenario::Assumptions => needs(self.noise.is_some(), "noise"),
        }
    }
}

/// Returns the value of an optional key or a missing-key error naming it.
pub(crate) fn require<T: Copy>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("missing key `{key}`")))
}
