//! Config-driven experiment runner behind the `cvxq` binary.
//!
//! Every verb is an ordinary function, so tests and examples can call it
//! in-process; [`main_with_args`] adds argument parsing and exit codes.

mod commands;
mod config;

pub use commands::{
    cmd_compare, cmd_oracle, cmd_residual, cmd_run, compute_reference, exit, exit_code, greedy_goal_steps,
    lqr_value_matrix, run_config, visited_bin_error, CompareMetrics, OracleComparison, Reference, ResidualOutput,
    RunSummary, SUMMARY_SCHEMA_VERSION,
};
pub use config::{
    AlgoName, AlgorithmConfig, Arch, ArchConfig, Config, ExplorationConfig, MuConfig, OutputConfig, PolicyConfig,
    System, SystemConfig, ZetaConfig,
};

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "cvxq", version, about = "Convex Q-learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explore, learn, evaluate and write the results.
    Run { config: PathBuf },
    /// Errors of a stored θ against a reference file.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        theta: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        /// Grid size, e.g. `40x20` (Mountain Car) or `11` (LQR).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Projected Bellman residual of a stored θ on a trajectory.
    Residual {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        theta: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, value_enum, default_value = "features")]
        zeta: ZetaArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precompute the exact reference for the configured system.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ZetaArg {
    Zero,
    PerSample,
    PerPair,
    Features,
    BinPattern,
    BinInput,
}

impl From<ZetaArg> for ZetaConfig {
    fn from(z: ZetaArg) -> Self {
        match z {
            ZetaArg::Zero => ZetaConfig::Zero,
            ZetaArg::PerSample => ZetaConfig::PerSample,
            ZetaArg::PerPair => ZetaConfig::PerPair,
            ZetaArg::Features => ZetaConfig::Features,
            ZetaArg::BinPattern => ZetaConfig::BinPattern,
            ZetaArg::BinInput => ZetaConfig::BinInput,
        }
    }
}

fn parse_grid(s: &str) -> crate::Result<Vec<usize>> {
    s.split(['x', ','])
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| crate::Error::Config(format!("bad grid {s:?}; expected e.g. 40x20")))
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&PathBuf>) -> crate::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> crate::Result<i32> {
    match cli.command {
        Command::Run { config } => {
            let s = cmd_run(&config)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(s.exit_code())
        }
        Command::Compare { config, theta, oracle, grid, out } => {
            let grid = grid.as_deref().map(parse_grid).transpose()?;
            let m = cmd_compare(&config, &theta, &oracle, grid.as_deref())?;
            emit(&m, out.as_ref())?;
            Ok(exit::OK)
        }
        Command::Residual { config, theta, trajectory, zeta, out } => {
            let r = cmd_residual(&config, &theta, &trajectory, zeta.into())?;
            emit(&r, out.as_ref())?;
            Ok(exit::OK)
        }
        Command::Oracle { config, out } => {
            let p = cmd_oracle(&config, out.as_deref())?;
            println!("{}", p.display());
            Ok(exit::OK)
        }
    }
}

/// Parses `args` (program name first), runs the verb and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cvxq: {e}");
            exit_code(&e)
        }
    }
}
