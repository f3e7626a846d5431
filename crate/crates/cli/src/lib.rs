//! Command-line front end for the `spinlink` simulator.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;

pub use config::{CommandKind, ProtocolName, RunConfig, Settings};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const IO: i32 = 2;
    pub const INVARIANT: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io(_) => exit::IO,
            CliError::Invariant(_) => exit::INVARIANT,
        }
    }
}

impl From<spinlink::Error> for CliError {
    fn from(e: spinlink::Error) -> Self {
        match e {
            spinlink::Error::Unphysical(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "spinlink", version, about = "Simulate QND entanglement of two atomic spin ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Options {
    /// Flat key-value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Faraday angle and coupling strengths from laboratory parameters.
    Calibrate(Options),
    /// Monte Carlo measurement cycles and entanglement verdict.
    Run(Options),
    /// Projection and conditional noise against atomic density.
    Sweep(Options),
    /// Time-domain pulse simulation compared against the Gaussian engine.
    Timedomain(Options),
    /// Teleportation, entanglement swapping or quantum memory.
    Protocol(Options),
}

impl Command {
    fn split(self) -> (CommandKind, Options) {
        match self {
            Command::Calibrate(o) => (CommandKind::Calibrate, o),
            Command::Run(o) => (CommandKind::Run, o),
            Command::Sweep(o) => (CommandKind::Sweep, o),
            Command::Timedomain(o) => (CommandKind::Timedomain, o),
            Command::Protocol(o) => (CommandKind::Protocol, o),
        }
    }
}

/// Merges flags with the optional config file and resolves defaults.
pub fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let (kind, opts) = cli.command.split();
    let file = match &opts.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    RunConfig::resolve(kind, opts.settings.over(file))
}

/// Runs one resolved command on `config.parallel` threads. The report is
/// buffered so it reaches `out` only once the command has finished.
pub fn execute(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let mut buf: Vec<u8> = Vec::new();
    let result = match config.parallel {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| commands::dispatch(config, &mut buf))
        }
        None => commands::dispatch(config, &mut buf),
    };
    out.write_all(&buf).map_err(|e| CliError::Io(format!("stdout: {e}")))?;
    result
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Diagnostics go to `err`.
pub fn run_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match resolve(cli).and_then(|config| execute(&config, out)) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
