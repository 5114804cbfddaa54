//! `selforg`: relaxation, detuning sweeps, phonons and probe spectra from a JSON configuration.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 no steady state,
//! 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Context};
use config::LoadedConfig;

#[derive(Parser)]
#[command(name = "selforg", version, about = "Self-organization of driven atoms along a waveguide")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relax the initial configuration to a steady state.
    Relax(RunArgs),
    /// Follow the steady state across a detuning grid.
    Sweep(RunArgs),
    /// Normal modes about the initial configuration.
    Phonons(RunArgs),
    /// Probe reflection and transmission of the initial configuration.
    Spectrum(RunArgs),
    /// Every table needed by the figure scripts.
    Figdata(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for grid evaluations (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed of the initial-position perturbation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

type Handler = fn(&Context, &std::path::Path) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, args): (Handler, RunArgs) = match cli.command {
        Command::Relax(a) => (commands::relax, a),
        Command::Sweep(a) => (commands::sweep, a),
        Command::Phonons(a) => (commands::phonons, a),
        Command::Spectrum(a) => (commands::spectrum, a),
        Command::Figdata(a) => (commands::figdata, a),
    };
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let loaded = LoadedConfig::load(&args.config).map_err(CliError::Config)?;
    let ctx = Context {
        loaded,
        seed: args.seed,
    };
    command(&ctx, &args.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
