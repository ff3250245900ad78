//! `fracblow`: evaluate nonlocal operators, solve for large solutions, certify barriers
//! and run the boundary-behaviour experiments from a TOML configuration.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracblow_core::Error;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "FRACBLOW_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Core(Error),
    /// A run that completed but whose checks failed.
    #[error("check failed: {message}")]
    Check { message: String, report: serde_json::Value },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                Error::Domain(_)
                | Error::InvalidParameter { .. }
                | Error::PvUndefined { .. }
                | Error::AmbiguousProjection { .. }
                | Error::NotOnBoundary { .. }
                | Error::EmptyIndexSet(_) => 1,
                _ => 2,
            },
            CliError::Check { .. } => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "fracblow", version, about = "Nonlocal operators, large solutions and their boundary behaviour")]
#[command(after_help = "The worker thread count is read from FRACBLOW_THREADS (default: all cores).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Experiment configuration (TOML). Omitted tables take their defaults.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a configuration entry, e.g. `--set solver.delta=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the configured operator on `[field]` at the analysis points.
    Eval(Common),
    /// Print the half-space constant c_K(tau) as one CSV row.
    CConstant {
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        #[arg(long, allow_hyphen_values = true)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Use the kernel and quadrature of this configuration instead of the normalized
        /// isotropic kernel.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Solve the Dirichlet problem with prescribed boundary blow-up.
    Solve(Common),
    /// Build and certify the upper and lower barrier envelopes.
    VerifyBarriers(Common),
    /// Measure |d^{1-s} u - h| along inward normals.
    Profile(Common),
    /// Fit the growth rate of |Du| against the distance to the boundary.
    Rates(Common),
    /// Coefficients of the local limit as s tends to 1.
    Limit(Common),
    /// Leading-order constant of the operator on d^tau |x - x0|^alpha, and the indicator estimate.
    CheckLemma(Common),
    /// Harmonicity and gradient of the half-space large solution (p' . x') x_N^{s-1}.
    CheckHalfspace(Common),
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} = `{v}` is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Eval(c) => commands::eval(&c),
        Command::CConstant { s, tau, dim, config } => commands::c_constant(s, tau, dim, config.as_deref()),
        Command::Solve(c) => commands::solve(&c),
        Command::VerifyBarriers(c) => commands::verify_barriers(&c),
        Command::Profile(c) => commands::profile(&c),
        Command::Rates(c) => commands::rates(&c),
        Command::Limit(c) => commands::limit(&c),
        Command::CheckLemma(c) => commands::check_lemma(&c),
        Command::CheckHalfspace(c) => commands::check_halfspace(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("fracblow: {e}");
            if code == 2 {
                let diag = output::diagnostic(&e);
                let text = serde_json::to_string_pretty(&diag).unwrap_or_default();
                eprintln!("{text}");
                if let Some(dir) = output::last_dir() {
                    let _ = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("diagnostic.json"), text + "\n"));
                }
            }
            ExitCode::from(code)
        }
    }
}
