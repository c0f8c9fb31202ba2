//! `pwalk`: configuration-driven experiments on random walks, their
//! boundaries and the entropy, ray and strip criteria.
//!
//! Each command reads one TOML config, runs the matching library
//! operation and writes `<command>.json` and `<command>.csv` to the output
//! directory. Outputs depend only on the config text and the seed.

pub mod commands;
pub mod config;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use thiserror::Error;

use poisson_walks::McConfig;

pub use config::LoadedConfig;
pub use report::{emit_plot_data, Check, Outcome, Series};

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_RESOURCE: u8 = 3;
pub const EXIT_VERDICT: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Resource(_) => EXIT_RESOURCE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<poisson_walks::Error> for CliError {
    fn from(e: poisson_walks::Error) -> Self {
        use poisson_walks::Error as E;
        match e {
            E::Resource { .. } => CliError::Resource(e.to_string()),
            E::InvalidGroup(_)
            | E::InvalidMeasure(_)
            | E::Parse { .. }
            | E::InvalidArgument(_)
            | E::NotATree
            | E::NotHarmonic { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    EstimateDrift,
    EstimateEntropy,
    HarmonicMeasure,
    Rn,
    ConditionalEntropy,
    EntropyGap,
    Maximality,
    RayCheck,
    StripCheck,
    Regularity,
    Lyapunov,
    Flag,
}

impl Command {
    pub const ALL: [Command; 12] = [
        Command::EstimateDrift,
        Command::EstimateEntropy,
        Command::HarmonicMeasure,
        Command::Rn,
        Command::ConditionalEntropy,
        Command::EntropyGap,
        Command::Maximality,
        Command::RayCheck,
        Command::StripCheck,
        Command::Regularity,
        Command::Lyapunov,
        Command::Flag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::EstimateDrift => "estimate-drift",
            Command::EstimateEntropy => "estimate-entropy",
            Command::HarmonicMeasure => "harmonic-measure",
            Command::Rn => "rn",
            Command::ConditionalEntropy => "conditional-entropy",
            Command::EntropyGap => "entropy-gap",
            Command::Maximality => "maximality",
            Command::RayCheck => "ray-check",
            Command::StripCheck => "strip-check",
            Command::Regularity => "regularity",
            Command::Lyapunov => "lyapunov",
            Command::Flag => "flag",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "pwalk", version, about = "Random walk boundary experiments")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Exit with code 4 when a check fails.
    #[arg(long)]
    pub assert: bool,
}

/// Runs one command on a loaded config.
pub fn execute(command: Command, cfg: &LoadedConfig, workers: usize) -> Result<Outcome, CliError> {
    let mc = McConfig::new(cfg.seed).with_workers(workers.max(1));
    use commands::*;
    match command {
        Command::EstimateDrift => estimate_drift_cmd(cfg, &mc),
        Command::EstimateEntropy => estimate_entropy_cmd(cfg, &mc),
        Command::HarmonicMeasure => harmonic_measure_cmd(cfg, &mc),
        Command::Rn => rn_cmd(cfg, &mc),
        Command::ConditionalEntropy => conditional_entropy_cmd(cfg, &mc),
        Command::EntropyGap => entropy_gap_cmd(cfg, &mc),
        Command::Maximality => maximality_cmd(cfg, &mc),
        Command::RayCheck => ray_check_cmd(cfg, &mc),
        Command::StripCheck => strip_check_cmd(cfg, &mc),
        Command::Regularity => regularity_cmd(cfg, &mc),
        Command::Lyapunov => lyapunov_cmd(cfg, &mc),
        Command::Flag => flag_cmd(cfg, &mc),
    }
}

/// Paths of the files a run wrote.
#[derive(Debug, Clone)]
pub struct Written {
    pub json: PathBuf,
    pub csv: PathBuf,
    pub extra: Vec<PathBuf>,
    pub outcome: Outcome,
}

/// Runs `command` and writes its report files into `out_dir`.
pub fn run_to_dir(command: Command, cfg: &LoadedConfig, out_dir: &Path, workers: usize) -> Result<Written, CliError> {
    let outcome = execute(command, cfg, workers)?;
    let io = |e: std::io::Error| CliError::Runtime(format!("writing reports to {}: {e}", out_dir.display()));
    fs::create_dir_all(out_dir).map_err(io)?;
    let name = command.name();
    let json = out_dir.join(format!("{name}.json"));
    let csv = out_dir.join(format!("{name}.csv"));
    fs::write(&json, report::render_json(name, cfg.seed, &cfg.hash, &cfg.warnings, &outcome)).map_err(io)?;
    fs::write(&csv, emit_plot_data(&outcome.series)).map_err(io)?;
    let mut extra = Vec::new();
    for (suffix, contents) in &outcome.extra {
        let p = out_dir.join(format!("{name}.{suffix}"));
        fs::write(&p, contents).map_err(io)?;
        extra.push(p);
    }
    Ok(Written { json, csv, extra, outcome })
}

/// Full CLI behaviour; returns the process exit code.
pub fn run(args: &Args) -> u8 {
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("validation error: cannot read {}: {e}", args.config.display());
            return EXIT_VALIDATION;
        }
    };
    let cfg = match LoadedConfig::parse(&text, args.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let out_dir = args.out_dir.clone().unwrap_or_else(|| cfg.config.output.dir.clone());
    match run_to_dir(args.command, &cfg, &out_dir, args.workers) {
        Ok(w) => {
            for c in &w.outcome.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("wrote {} and {}", w.json.display(), w.csv.display());
            if args.assert && !w.outcome.passed() {
                return EXIT_VERDICT;
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
