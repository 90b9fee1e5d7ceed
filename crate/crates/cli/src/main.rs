mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Command, ExperimentConfig};

/// Batch driver for the conewalk laboratory: one JSON config in, CSV
/// tables and a manifest out.
///
/// Exit status: 0 success, 1 verification rows failed, 2 invalid input,
/// 3 numerical failure. CONEWALK_THREADS caps the worker pool.
#[derive(Debug, Parser)]
#[command(name = "conewalk", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config; `verify` may omit it when `--suite` is given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Suite name for `verify`.
    #[arg(long)]
    suite: Option<String>,
}

fn init_threads() {
    let Ok(raw) = std::env::var("CONEWALK_THREADS") else {
        return;
    };
    match raw.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("could not size the thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring CONEWALK_THREADS={raw}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_threads();

    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("conewalk: {}: {e}", e.code());
                return ExitCode::from(run::EXIT_VALIDATION as u8);
            }
        },
        None if cli.command == Command::Verify => ExperimentConfig::default(),
        None => {
            eprintln!(
                "conewalk: --config is required for `{}`",
                cli.command.as_str()
            );
            return ExitCode::from(run::EXIT_VALIDATION as u8);
        }
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.tol.is_some() {
        cfg.tol = cli.tol;
    }
    if cli.trials.is_some() {
        cfg.trials = cli.trials;
    }
    if cli.suite.is_some() {
        cfg.suite = cli.suite.clone();
    }
    if cli.command == Command::Verify && cfg.seed.is_none() {
        cfg.seed = Some(1);
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("conewalk-out"));

    let code = run::run(cli.command, &cfg, &out);
    if code != run::EXIT_OK {
        eprintln!(
            "conewalk: exit {code}; see {}",
            out.join("manifest.json").display()
        );
    }
    ExitCode::from(code as u8)
}
