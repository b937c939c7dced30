use std::path::{Path, PathBuf};
use std::process::Command;

use anisoldp_cli::{run, RunConfig, RunOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anisoldp"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const SHEAR: &str = "scenario = \"exact-shear\"\n[grid]\nn1 = 16\n[solver]\ndt = 0.001\nT = 1.0\nsave_every = 100\n";

const TAIL: &str = r#"
scenario = "mc-tail"
seed = 5
[grid]
n1 = 8
[solver]
dt = 0.05
T = 1.0
[noise]
kind = "single-mode"
amplitude = 1.0
[mc_tail]
family = "small-noise"
linear = true
eps = [0.2, 0.1]
n = [400]
event = "terminal-norm"
r = 0.3
"#;

#[test]
fn exact_shear_passes_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "shear.toml", SHEAR);
    let out = dir.path().join("out");
    let status = bin().args(["run", cfg.to_str().unwrap(), "--check", "--out", out.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("shear.csv")).unwrap();
    assert!(csv.starts_with("t,H2,exact_H2,error\n"));
    let last: f64 = csv.lines().last().unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(last <= 1e-8, "{last}");
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["check"]["passed"], true);
    assert!(manifest["git_describe"].is_string() && manifest["wall_time_s"].is_number());
}

#[test]
fn missing_and_unknown_keys_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "scenario = \"exact-shear\"\n[grid]\nn1 = 16\n[solver]\nT = 1.0\n");
    let o = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt"));

    let cfg = write_config(dir.path(), "typo.toml", &format!("{SHEAR}stepz = 3\n[extra]\nx = 1\n"));
    let o = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(msg.contains("solver.stepz") && msg.contains("extra"), "{msg}");
}

#[test]
fn blow_up_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = "scenario = \"deterministic-energy\"\n[grid]\nn1 = 16\n[solver]\ndt = 0.5\nT = 50.0\n\
                [initial]\nkind = \"random\"\namp = 1e8\n";
    let cfg = write_config(dir.path(), "boom.toml", text);
    let out = dir.path().join("out");
    let status = bin().args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn failed_check_exits_with_four_only_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    // no run can meet a negative tolerance
    let cfg = write_config(dir.path(), "strict.toml", &format!("{SHEAR}[exact_shear]\ntol = -1.0\n"));
    let out = dir.path().join("out");
    let args = ["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(bin().args(args).status().unwrap().code(), Some(0));
    assert_eq!(bin().args(args).arg("--check").status().unwrap().code(), Some(4));
}

fn run_in(dir: &Path, text: &str, seed: Option<u64>, workers: Option<usize>) -> PathBuf {
    let out = dir.join(format!("run-{seed:?}-{workers:?}"));
    run(text, &RunOptions { check: false, seed, out: Some(out.clone()), workers }).unwrap();
    out
}

fn read(p: PathBuf) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn monte_carlo_csv_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), TAIL, None, Some(1));
    let b = run_in(dir.path(), TAIL, None, Some(4));
    assert_eq!(read(a.join("probe.csv")), read(b.join("probe.csv")));
    let c = run_in(dir.path(), TAIL, Some(6), Some(2));
    assert_ne!(read(a.join("probe.csv")), read(c.join("probe.csv")));
}

#[test]
fn seed_override_leaves_deterministic_outputs_alone() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), SHEAR, None, None);
    let b = run_in(dir.path(), SHEAR, Some(99), None);
    assert_eq!(read(a.join("shear.csv")), read(b.join("shear.csv")));
}

#[test]
fn echoed_config_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), SHEAR, Some(3), None);
    let echo = std::fs::read_to_string(a.join("config.echo.toml")).unwrap();
    let b = dir.path().join("again");
    run(&echo, &RunOptions { out: Some(b.clone()), ..Default::default() }).unwrap();
    assert_eq!(read(a.join("shear.csv")), read(b.join("shear.csv")));
    let again = RunConfig::parse(&std::fs::read_to_string(b.join("config.echo.toml")).unwrap()).unwrap();
    let first = RunConfig::parse(&echo).unwrap();
    assert_eq!(RunConfig { out_dir: None, ..again }, RunConfig { out_dir: None, ..first });
}

#[test]
fn shipped_configs_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::parse(&std::fs::read_to_string(&path).unwrap())
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
            n += 1;
        }
    }
    assert!(n >= 9);
}

#[test]
fn cheap_scenarios_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["skeleton", "rate-small-time", "assumptions-remark", "assumptions-feedback"] {
        let text = std::fs::read_to_string(configs_dir().join(format!("{name}.toml"))).unwrap();
        let out = dir.path().join(name);
        let report = run(&text, &RunOptions { out: Some(out.clone()), ..Default::default() }).unwrap();
        for f in &report.manifest.outputs {
            assert!(out.join(f).exists(), "{name}: {f}");
        }
        if name == "assumptions-feedback" {
            assert!(!report.manifest.check.unwrap().passed);
        } else if name != "skeleton" {
            assert!(report.manifest.check.unwrap().passed, "{name}");
        }
    }
}

#[test]
fn rate_small_noise_reports_reference() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs_dir().join("rate-small-noise.toml")).unwrap();
    let text = text.replace("dt = 0.001", "dt = 0.01").replace("dt_c = 0.01", "dt_c = 0.05");
    let report = run(&text, &RunOptions { out: Some(dir.path().join("o")), check: true, ..Default::default() }).unwrap();
    let s = &report.manifest.summary;
    let (v, r) = (s["value"].as_f64().unwrap(), s["reference"].as_f64().unwrap());
    assert!((v / r - 1.0).abs() < 0.05, "{v} vs {r}");
}
