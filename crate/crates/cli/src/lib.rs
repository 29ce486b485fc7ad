//! Command-line front end for the causal evidence engine.
//!
//! [`run_cli`] is the whole program minus process exit, so tests can drive
//! it in-process and compare its output streams.

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
pub mod commands;
pub mod config;
pub mod report;

use args::{Cli, Command};
use causal_core::Result;
use report::{render_report, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn dispatch(command: &Command) -> Result<Report> {
    match command {
        Command::Measure(i) => commands::measure(i),
        Command::Meta(i) => commands::meta(i),
        Command::Dose(i) => commands::dose(i),
        Command::Checklist(i) => commands::checklist(i),
        Command::Legal(i) => commands::legal(i),
        Command::Apportion { rr_a, rr_s, rr_as, scheme } => commands::apportion(*rr_a, *rr_s, *rr_as, *scheme),
        Command::Taxi { spec } => commands::taxi(spec),
        Command::Sensitivity { input, seed, draws, threshold } => {
            commands::sensitivity(input, *seed, *draws, *threshold)
        }
        Command::Simulate { truth, seed, study_out } => commands::simulate(truth, *seed, study_out.as_deref()),
    }
}

/// Parses `argv` (program name first), runs the command and writes the
/// report to `stdout`. Returns the process exit code.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.threads {
        Some(0) => {
            let _ = writeln!(stderr, "error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => {
                let _ = writeln!(stderr, "error: cannot start worker threads: {e}");
                return EXIT_FAILURE;
            }
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok(report) => {
            if stdout.write_all(&render_report(&report, cli.format)).is_err() {
                return EXIT_FAILURE;
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_FAILURE
        }
    }
}
