use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use qicert::montecarlo::VerdictStatus;
use qicert_cli::args::{Cli, Command};
use qicert_cli::{run, CliError, Output, EXIT_OK, EXIT_USAGE, EXIT_VERDICT_FAIL};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_path = match &cli.command {
        Command::Certify(a) => a.output.out.clone(),
        Command::Experiment(a) => a.output.out.clone(),
        Command::Verify(a) => a.output.out.clone(),
        Command::Gen(a) => a.output.out.clone(),
    };
    let code = match run(&cli) {
        Ok(Output::Report(report)) => {
            let fail = report.any_fail();
            eprintln!(
                "{}: {} verdicts, {} pass, {} fail, {} vacuous, {} out of domain ({:.3} s)",
                report.command,
                report.verdicts.len(),
                report.count(VerdictStatus::Pass),
                report.count(VerdictStatus::Fail),
                report.count(VerdictStatus::Vacuous),
                report.count(VerdictStatus::OutOfDomain),
                report.timing.wall_seconds,
            );
            if let Some(note) = report.results.get("summary").and_then(|v| v.as_str()) {
                eprintln!("{note}");
            }
            match emit(&report.to_json(), out_path.as_deref()) {
                Ok(()) if fail => EXIT_VERDICT_FAIL,
                Ok(()) => EXIT_OK,
                Err(e) => report_error(&e),
            }
        }
        Ok(Output::Csv(csv)) => match emit(&csv, out_path.as_deref()) {
            Ok(()) => EXIT_OK,
            Err(e) => report_error(&e),
        },
        Err(e) => report_error(&e),
    };
    ExitCode::from(code as u8)
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn report_error(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    match e {
        CliError::Io { .. } => EXIT_USAGE,
        other => other.exit_code(),
    }
}
