//! Command-line front end for `kpp-core`: reads one JSON run configuration,
//! runs an experiment and writes deterministic reports plus a manifest.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use kpp_core::KppError;

use crate::config::RunConfig;
use crate::output::Output;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kpp-lab", version, about = "Numerical laboratory for KPP reaction-dispersal equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Overrides `output_dir` from the config.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Integrate the equation and write the trajectory.
    Simulate { config: PathBuf },
    /// Variational spreading speed, optionally with front tracking.
    Speed { config: PathBuf },
    /// Principal growth rate at the configured tilt.
    Eigen { config: PathBuf },
    /// Time-periodic attractor from a constant start.
    Attractor { config: PathBuf },
    /// Uniqueness of the attractor across several starts.
    Liouville { config: PathBuf },
    /// Gap between perturbed and reference attractors versus radius.
    Tail { config: PathBuf },
    /// Run the listed checks as one bundle.
    Verify { config: PathBuf },
}

impl Command {
    fn parts(&self) -> (&'static str, &PathBuf) {
        match self {
            Command::Simulate { config } => ("simulate", config),
            Command::Speed { config } => ("speed", config),
            Command::Eigen { config } => ("eigen", config),
            Command::Attractor { config } => ("attractor", config),
            Command::Liouville { config } => ("liouville", config),
            Command::Tail { config } => ("tail", config),
            Command::Verify { config } => ("verify", config),
        }
    }
}

/// Exit code for an error raised while running a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<KppError>() {
        Some(KppError::DegenerateMedium { .. } | KppError::Extinction { .. }) => EXIT_DEGENERATE,
        Some(
            KppError::Config { .. }
            | KppError::Hypothesis { .. }
            | KppError::DomainMismatch(_)
            | KppError::Parse(_)
            | KppError::Io(_)
            | KppError::Cfl { .. },
        ) => EXIT_CONFIG,
        _ => EXIT_CHECK_FAILED,
    }
}

fn execute(cli: &Cli) -> anyhow::Result<i32> {
    let (name, path) = cli.command.parts();
    let (mut config, base) = RunConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let root = cli
        .output_dir
        .clone()
        .or_else(|| config.output_dir.as_ref().map(|d| base.join(d)))
        .unwrap_or_else(|| PathBuf::from("kpp-lab-out"));
    let prepared = config.prepare(&base)?;
    let mut out = Output::create(&root)?;
    out.note("threads", serde_json::json!(rayon::current_num_threads()));
    let result = match &cli.command {
        Command::Simulate { .. } => commands::simulate(&prepared, &mut out),
        Command::Speed { .. } => commands::speed(&prepared, &mut out),
        Command::Eigen { .. } => commands::eigen(&prepared, &mut out),
        Command::Attractor { .. } => commands::attractor(&prepared, &mut out),
        Command::Liouville { .. } => commands::liouville(&prepared, &mut out),
        Command::Tail { .. } => commands::tail(&prepared, &mut out),
        Command::Verify { .. } => match commands::verify(&prepared, &mut out)? {
            (_, Some(err)) => {
                out.finish(name)?;
                return Err(err);
            }
            (verdict, None) => Ok(verdict),
        },
    };
    let verdict = result?;
    out.finish(name)?;
    Ok(if verdict { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    }
}
