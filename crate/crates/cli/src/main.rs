//! `loghartree` command-line driver.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 when the
//! run itself fails (bad configuration, I/O, non-convergence).

mod commands;
mod config;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{Ctx, Status};
use config::{BoxSize, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "loghartree", version, about = "Ground states of the 2D coupled logarithmic Hartree system")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for data-parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Grid points per side; overrides the configuration.
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,

    /// Box half-width, a number or "auto"; overrides the configuration.
    #[arg(long = "box", global = true)]
    half_width: Option<BoxSize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground state of the first scalar equation.
    Scalar,
    /// Both scalar ground states and the coupling thresholds.
    Thresholds,
    /// Coupled ground state.
    Coupled,
    /// Coupled ground states along the configured list of couplings.
    Sweep,
    /// Re-verify a stored state directory.
    Verify {
        state: PathBuf,
    },
    /// Oracle checks that need no solve.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Scalar => "scalar",
            Command::Thresholds => "thresholds",
            Command::Coupled => "coupled",
            Command::Sweep => "sweep",
            Command::Verify { .. } => "verify",
            Command::Selftest { .. } => "selftest",
        }
    }
}

fn load_config(cli: &Cli, overrides: &Overrides) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .context("invalid argument: --config is required for this command")?;
    RunConfig::load(path, overrides)
}

fn run(cli: &Cli, config: Option<&RunConfig>, ctx: &mut Ctx) -> Result<Status> {
    match &cli.command {
        Command::Scalar => commands::cmd_scalar(config.expect("loaded"), ctx),
        Command::Thresholds => commands::cmd_thresholds(config.expect("loaded"), ctx),
        Command::Coupled => commands::cmd_coupled(config.expect("loaded"), ctx),
        Command::Sweep => commands::cmd_sweep(config.expect("loaded"), ctx),
        Command::Verify { state } => {
            let tol = config.map(|c| c.tolerances).unwrap_or_default();
            commands::cmd_verify(state, &tol, ctx)
        }
        Command::Selftest { seed } => commands::cmd_selftest(*seed, ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let overrides = Overrides {
        out: cli.out.clone(),
        grid_n: cli.grid_n,
        half_width: cli.half_width,
    };

    let needs_config = !matches!(cli.command, Command::Verify { .. } | Command::Selftest { .. });
    let config = if needs_config || cli.config.is_some() {
        match load_config(&cli, &overrides) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        }
    } else {
        None
    };

    let out = match (&cli.command, &cli.out, &config) {
        (_, Some(out), _) => out.clone(),
        (Command::Verify { state }, None, _) => state.join("verify"),
        (Command::Selftest { .. }, None, _) => PathBuf::from("out").join("selftest"),
        (_, None, Some(c)) => c.output.clone(),
        (_, None, None) => PathBuf::from("out"),
    };
    let mut ctx = Ctx::new(cli.command.name(), out, threads);
    let (code, error) = match run(&cli, config.as_ref(), &mut ctx) {
        Ok(status) => (status.code(), None),
        Err(e) => {
            eprintln!("error: {e:#}");
            (2, Some(format!("{e:#}")))
        }
    };
    if let Err(e) = commands::write_manifest(&ctx, config.as_ref(), code, error) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    ExitCode::from(code as u8)
}
