//! Library side of the `qicert` binary: argument types, report assembly and
//! one function per subcommand.

pub mod args;
pub mod commands;
pub mod report;

use std::io;
use std::path::PathBuf;
use std::time::Instant;

use args::{Cli, Command};
pub use commands::{cmd_certify, cmd_experiment, cmd_gen, cmd_verify};
pub use report::Report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        source: qicert::Error,
    },
    #[error(transparent)]
    Core(#[from] qicert::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) | CliError::Input { source: e, .. } if e.is_numerical() => {
                EXIT_NUMERICAL
            }
            _ => EXIT_USAGE,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// What a subcommand produced.
#[derive(Debug)]
pub enum Output {
    Report(Report),
    Csv(String),
}

/// Runs one parsed command line, honouring `--threads`.
pub fn run(cli: &Cli) -> CliResult<Output> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(|| dispatch(&cli.command)),
        None => dispatch(&cli.command),
    }
}

fn dispatch(command: &Command) -> CliResult<Output> {
    let start = Instant::now();
    let mut report = match command {
        Command::Certify(a) => cmd_certify(a)?,
        Command::Experiment(a) => cmd_experiment(a)?,
        Command::Verify(a) => cmd_verify(a)?,
        Command::Gen(a) => return cmd_gen(a).map(Output::Csv),
    };
    report.timing.wall_seconds = start.elapsed().as_secs_f64();
    Ok(Output::Report(report))
}
