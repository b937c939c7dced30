use std::path::PathBuf;
use std::process::ExitCode;

use anisoldp_cli::{run_file, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anisoldp", version, about = "Anisotropic stochastic Navier-Stokes experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run {
        config: PathBuf,
        /// Exit with status 4 when the scenario's check fails.
        #[arg(long)]
        check: bool,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for Monte Carlo loops.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let Command::Run { config, check, seed, out, workers } = Cli::parse().command;
    match run_file(&config, &RunOptions { check, seed, out, workers }) {
        Ok(report) => {
            let m = &report.manifest;
            println!("{:?} finished in {:.2}s, outputs in {}", m.scenario, m.wall_time_s, report.out_dir.display());
            if let Some(c) = &m.check {
                println!("check {}: {}", if c.passed { "passed" } else { "failed" }, c.detail);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
