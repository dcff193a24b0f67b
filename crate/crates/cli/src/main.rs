use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phasefront::Error;

mod commands;
mod config;

use config::{parse_overrides, RunConfig};

/// Simulator and verification toolkit for trait-structured invasion fronts.
#[derive(Debug, Parser)]
#[command(name = "phasefront", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; every key has a default.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Config overrides as `--key value`, `--section.key value` or
    /// `--key=value`.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY VALUE"
    )]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the local or nonlocal model and record snapshots and fronts.
    Simulate(Common),
    /// Solve the steady disc and annulus problems and compare boundary slopes.
    Steady(Common),
    /// March the sliding sub-solution and check ordering and domination.
    Subsolution(Common),
    /// Fit spreading exponents to a recorded fronts.csv.
    Analyze(Common),
    /// Time the integrator and compare checksums across worker counts.
    Bench(Common),
    /// Print the effective configuration.
    Config(Common),
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse(_) | Error::Shape(_) | Error::Io(_) => 2,
        Error::Numerical(_) | Error::OutOfBounds { .. } => 3,
        Error::Truncation(_) => 4,
    }
}

fn run(cli: Cli) -> phasefront::Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::config("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?;
    }
    let (common, cmd): (&Common, fn(&RunConfig) -> phasefront::Result<()>) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate),
        Command::Steady(c) => (c, commands::steady),
        Command::Subsolution(c) => (c, commands::subsolution),
        Command::Analyze(c) => (c, commands::analyze),
        Command::Bench(c) => (c, commands::bench),
        Command::Config(c) => (c, commands::show_config),
    };
    let mut overrides = parse_overrides(&common.overrides)?;
    if matches!(cli.command, Command::Analyze(_)) {
        // For analyze, `--m` names the level to fit, checked against the run.
        for (key, _) in &mut overrides {
            if key == "m" || key == "level" {
                *key = "analyze.m".into();
            }
        }
    }
    let config = RunConfig::load(common.config.as_deref(), &overrides)?;
    cmd(&config)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                Error::Config(list) if list.len() > 1 => {
                    eprintln!("error: invalid configuration:");
                    for p in list {
                        eprintln!("  - {p}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
