//! `nprl`: runs the generation, extraction, training, evaluation and theory
//! stages from one INI config, writing artifacts under `<out>/<run id>/`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

/// Default output root when neither `--out`, `run.out` nor `NPRL_OUT` is set.
const DEFAULT_OUT: &str = "runs";

#[derive(Parser, Debug)]
#[command(name = "nprl", version, about = "Nightly sepsis onset prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; defaults to $NPRL_OUT, then ./runs.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override one setting, e.g. `--set model.gru_hidden=32`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Generate a synthetic cohort.
    Gen,
    /// Clean, label and extract nightly instances from the cohort.
    Extract,
    /// Instance-discrimination pretraining on every extracted night.
    Pretrain,
    /// Train `eval.train_arm` on the full dataset.
    Train,
    /// Stratified cross-validation of every arm in `eval.arms`.
    Eval,
    /// Lipschitz probe, projected fine-tuning and the representation checks.
    Theory,
    /// gen, extract, eval and theory in sequence.
    All,
}

fn resolve(cli: &Cli) -> Result<(RunConfig, PathBuf), String> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            RunConfig::parse_ini(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        config.set_override(o)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if config.workers == 0 {
        return Err("workers must be at least 1".into());
    }
    let root = cli
        .out
        .clone()
        .or_else(|| config.out.clone().map(PathBuf::from))
        .or_else(|| std::env::var_os("NPRL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let run_dir = root.join(config.run_id());
    Ok((config, run_dir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config, run_dir) = match resolve(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("nprl: {e}");
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command, &config, &run_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nprl: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
