//! Scenario runner behind the `radreact` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use config::{Config, RunConfig};
use error::CliError;
use output::{write_run, RunOutput, Summary};
use scenario::{execute, Mode};

/// Environment variable replacing the configured output root.
pub const OUT_DIR_ENV: &str = "RADREACT_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Compare,
    Sweep,
}

fn output_root(configured: &str) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(configured),
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))
}

fn run_dir(cfg: &RunConfig) -> PathBuf {
    output_root(&cfg.output_root).join(&cfg.name)
}

/// Loads, executes and writes. Returns the written paths. Nothing is written
/// unless every run of the command succeeded.
pub fn dispatch(command: Command, config_path: &Path, jobs: usize) -> Result<Vec<PathBuf>, CliError> {
    let config = config::load(config_path)?;
    let pool = pool(jobs)?;
    match (command, config) {
        (Command::Run, Config::Run(cfg)) => {
            let out = pool.install(|| execute(&cfg, Mode::Run))?;
            write_run(&run_dir(&cfg), &out)
        }
        (Command::Compare, Config::Run(cfg)) => {
            let out = pool.install(|| execute(&cfg, Mode::Compare))?;
            write_run(&run_dir(&cfg), &out)
        }
        (Command::Sweep, Config::Sweep(sweep)) => {
            let outs: Vec<RunOutput> = pool.install(|| {
                sweep
                    .runs
                    .par_iter()
                    .map(|cfg| execute(cfg, Mode::Run))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            let mut written = Vec::new();
            let mut index = Summary::default();
            index.text("cli.kind", "sweep");
            index.text("cli.name", sweep.name.clone());
            index.int("cli.runs", sweep.runs.len());
            for (k, (cfg, out)) in sweep.runs.iter().zip(&outs).enumerate() {
                written.extend(write_run(&run_dir(cfg), out)?);
                index.text(&format!("cli.run_{k:03}"), cfg.name.clone());
            }
            let root = output_root(&sweep.output_root).join(&sweep.name);
            written.extend(write_run(&root, &RunOutput { files: Vec::new(), summary: index })?);
            Ok(written)
        }
        (Command::Sweep, Config::Run(cfg)) => Err(CliError::Config(format!("`sweep` needs kind sweep, got {}", cfg.scenario.kind()))),
        (_, Config::Sweep(_)) => Err(CliError::Config("kind sweep is run with the `sweep` command".into())),
    }
}
