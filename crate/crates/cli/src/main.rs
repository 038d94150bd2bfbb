//! `qexp`: compute error exponents, finite-n sweeps and invariant checks from a TOML config.
//!
//! Exit codes: 0 success, 2 configuration error, 3 computation error,
//! 4 verification failure.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::Overrides;
use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Compute(String),
    Verify(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
            CliError::Verify(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Compute(m) => write!(f, "computation error: {m}"),
            CliError::Verify(n) => write!(f, "verification failed: {n} check(s) did not pass"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(name = "qexp", version, about = "Error exponents for discriminating correlated quantum states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; defaults to csv for tables and json for reports.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for the randomized verification corpus.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest matrix dimension any computation may allocate.
    #[arg(long, global = true)]
    size_cap: Option<usize>,
    /// Number of points on the s-grid over [0, 1].
    #[arg(long, global = true)]
    s_grid: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// ψ, φ, Chernoff, Hoeffding and Stein exponents of the configured pair.
    Exponents,
    /// Finite-n slopes of the threshold tests against their limits.
    Sweep,
    /// Run the invariant suite; exit code 4 if any check fails.
    Verify,
    /// Exact error probabilities for a classical product pair.
    Classical,
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None if matches!(cli.command, Command::Verify) => RunConfig::default(),
        None => return Err(CliError::Config("--config is required".into())),
    };
    let o = Overrides { seed: cli.seed, size_cap: cli.size_cap, s_grid: cli.s_grid };
    match cli.command {
        Command::Exponents => commands::exponents(&cfg, &o, cli.format.unwrap_or(Format::Json)),
        Command::Sweep => commands::sweep(&cfg, &o, cli.format.unwrap_or(Format::Csv)),
        Command::Classical => commands::classical(&cfg, cli.format.unwrap_or(Format::Csv)),
        Command::Verify => {
            let checks = commands::verify(&cfg, &o)?;
            let text = commands::verify_output(&checks, cli.format.unwrap_or(Format::Json))?;
            write(cli, &text)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Verify(failed));
            }
            Ok(String::new())
        }
    }
}

fn write(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Compute(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                // a closed pipe (`qexp ... | head`) is not an error
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Compute(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|text| if text.is_empty() { Ok(()) } else { write(&cli, &text) });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qexp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
