//! `mmsupg`: runs and compares the fixed- and moving-mesh solvers.
//!
//! Exit codes: 0 on success, 1 when a solver or output step fails, 2 for
//! usage and configuration errors.

mod commands;
mod settings;
mod validate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmsupg::timestep::Method;
use mmsupg::Error;

use settings::{Settings, SolverArgs};

#[derive(Parser, Debug)]
#[command(
    name = "mmsupg",
    version,
    about = "Moving-mesh SUPG solvers for 2D convection-diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One method on one mesh: VTK snapshots, final norms and summary.txt.
    Run(SolverArgs),
    /// All four methods at the same n and dt; writes compare.csv.
    Compare(SolverArgs),
    /// Sweeps mesh levels and reports log-log slopes; writes convergence.csv.
    /// Runs all four methods unless --method is given.
    Convergence {
        #[command(flatten)]
        args: SolverArgs,
        /// Comma-separated cells per side.
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
        levels: Vec<usize>,
    },
    /// Runs the built-in oracle checks.
    Validate,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("MM_SUPG_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().ok().filter(|&n| n > 0).ok_or(format!(
        "MM_SUPG_THREADS must be a positive integer, got {raw:?}"
    ))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    eprintln!("run `mmsupg --help` for usage");
    ExitCode::from(2)
}

fn solver_result(result: mmsupg::Result<()>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn resolve(args: &SolverArgs) -> Result<Settings, ExitCode> {
    Settings::resolve(args).map_err(|e| match e {
        Error::Io { .. } => solver_result(Err(e)),
        other => usage_error(other),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        return usage_error(msg);
    }
    let outcome = match &cli.command {
        Command::Run(args) => resolve(args).map(|s| solver_result(commands::run(&s))),
        Command::Compare(args) => resolve(args).map(|s| solver_result(commands::compare(&s))),
        Command::Convergence { args, levels } => {
            let mut levels = levels.clone();
            levels.sort_unstable();
            levels.dedup();
            if levels.is_empty() || levels[0] == 0 {
                return usage_error("levels must be positive");
            }
            let methods: Result<Vec<Method>, ExitCode> = match &args.method {
                Some(m) => m.parse().map(|m| vec![m]).map_err(usage_error),
                None => Ok(Method::ALL.to_vec()),
            };
            methods.and_then(|methods| {
                resolve(args).map(|s| solver_result(commands::convergence(&s, &levels, &methods)))
            })
        }
        Command::Validate => Ok(match validate::run_checks() {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => solver_result(Err(e)),
        }),
    };
    outcome.unwrap_or_else(|code| code)
}
