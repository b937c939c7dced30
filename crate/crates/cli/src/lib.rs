//! Command-line orchestration for the `anisoldp` library: TOML run configs,
//! scenario dispatch, output directories with a manifest.

pub mod config;
pub mod error;
pub mod scenarios;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{RunConfig, Scenario};
pub use error::CliError;
pub use scenarios::{Check, Outcome};

/// Overrides given on the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub check: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub scenario: Scenario,
    pub seed: u64,
    pub workers: usize,
    pub git_describe: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub check: Option<Check>,
    pub summary: serde_json::Value,
    /// The effective configuration, overrides applied.
    pub config: String,
}

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

/// Reads and runs a config file.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    run(&text, opts)
}

/// Runs a config given as TOML text. A failed check is reported as
/// [`CliError::CheckFailed`] only when `opts.check` is set; the manifest is
/// written either way.
pub fn run(text: &str, opts: &RunOptions) -> Result<RunReport, CliError> {
    let mut cfg = RunConfig::parse(text)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(w) = opts.workers {
        cfg.workers = Some(w);
    }
    if cfg.workers == Some(0) {
        return Err(CliError::Config("workers must be positive".into()));
    }
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir).map_err(CliError::io(format!("creating {}", out_dir.display())))?;
    let echo = cfg.to_toml();
    std::fs::write(out_dir.join("config.echo.toml"), &echo).map_err(CliError::io("writing config.echo.toml"))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let mut outputs = scenarios::Outputs::new(&out_dir);
    let outcome = pool.install(|| scenarios::execute(&cfg, &mut outputs))?;
    let mut files = vec!["config.echo.toml".to_string()];
    files.extend(outputs.files);
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.scenario,
        seed: cfg.seed,
        workers: pool.current_num_threads(),
        git_describe: git_describe(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: files,
        check: outcome.check.clone(),
        summary: outcome.summary,
        config: echo,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest is serializable");
    std::fs::write(out_dir.join("manifest.json"), json + "\n").map_err(CliError::io("writing manifest.json"))?;
    if opts.check {
        if let Some(c) = outcome.check.filter(|c| !c.passed) {
            return Err(CliError::CheckFailed(c.detail));
        }
    }
    Ok(RunReport { out_dir, manifest })
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}
