//! Command-line experiments over tilted prior classes.
//!
//! Every command writes CSV tables and a `summary.json` into `<out>/<command>/`
//! followed by a `manifest.json` with the configuration, per-stage timings and
//! SHA-256 digests of the files. Exit codes: 0 success, 1 configuration error,
//! 2 property violation, 3 numerical failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod setup;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::Output;

#[derive(Debug, Parser)]
#[command(name = "tiltprior", version, about = "Experiments with exponentially tilted prior classes")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; overrides the file and the environment.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 or unset: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Dotted `key=value` override, repeatable, e.g. `--set sampler.n=1000`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Bands `exp(h(θ) t)` for preset tilts and the configured model.
    Bands,
    /// Base prior and class members from the derivative and conjugate routes.
    Classes,
    /// True, rejection ABC, pooled importance and conjugate posteriors.
    ComparePosteriors,
    /// ε from a Kolmogorov-distance bound κ.
    Elicit,
    /// Likelihood-ratio chains, nesting and MTP2 checks.
    Diagnostics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Classes => "classes",
            Command::ComparePosteriors => "compare-posteriors",
            Command::Elicit => "elicit",
            Command::Diagnostics => "diagnostics",
        }
    }
}

/// Configuration after applying the file, `--set` overrides and global flags.
pub fn resolve_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.set)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command, cfg: &ExperimentConfig, out: &mut Output) -> CliResult<()> {
    match command {
        Command::Bands => commands::bands::run(cfg, out),
        Command::Classes => commands::classes::run(cfg, out),
        Command::ComparePosteriors => commands::compare::run(cfg, out),
        Command::Elicit => commands::elicit::run(cfg, out),
        Command::Diagnostics => commands::diagnostics::run(cfg, out),
    }
}

/// Runs one command; the manifest is written even when the command fails
/// after creating its output directory.
pub fn run_cli(cli: &Cli) -> CliResult<PathBuf> {
    let cfg = resolve_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let dir = cfg.output_dir().join(cli.command.name());
    let mut out = Output::create(dir.clone())?;
    let result = pool.install(|| execute(cli.command, &cfg, &mut out));
    out.finish(cli.command.name(), &cfg)?;
    result.map(|()| dir)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("tiltprior {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
