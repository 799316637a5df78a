//! The `smoothcert` command-line tool as a library, so tests can drive it in-process.

pub mod args;
pub mod artifact;
mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};

pub use args::Cli;

/// Exit status of a runtime failure.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status of a malformed invocation (bad command, option or config).
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub usage: bool,
}

impl CliError {
    pub fn usage(kind: &str, message: impl Into<String>) -> Self {
        Self { kind: kind.to_string(), message: message.into(), usage: true }
    }

    pub fn runtime(kind: &str, message: impl Into<String>) -> Self {
        Self { kind: kind.to_string(), message: message.into(), usage: false }
    }

    pub fn exit_code(&self) -> i32 {
        if self.usage {
            EXIT_USAGE
        } else {
            EXIT_FAILURE
        }
    }
}

impl fmt::Display for CliError {
    /// The machine-readable error line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let message = self.message.replace(['\n', '\r'], " ");
        write!(f, "error: kind={} message={}", self.kind, message.trim())
    }
}

impl From<smoothcert::Error> for CliError {
    fn from(e: smoothcert::Error) -> Self {
        Self::runtime(e.kind(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::runtime("io", e.to_string())
    }
}

pub fn command() -> clap::Command {
    Cli::command().args_override_self(true).mut_subcommands(|s| s.args_override_self(true))
}

/// Runs one invocation and returns the exit status. Errors are reported on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    match try_run(argv.into_iter().map(Into::into).collect()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn try_run(argv: Vec<OsString>) -> Result<i32, CliError> {
    let cmd = command();
    let argv = config::expand_args(argv, &cmd)?;
    let matches = match cmd.clone().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(0);
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            return Ok(EXIT_USAGE);
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let mut lines = rendered.lines();
            let first = lines.next().unwrap_or_default();
            eprintln!("{}", CliError::usage("usage", first.trim_start_matches("error: ")));
            for l in lines {
                eprintln!("{l}");
            }
            return Ok(EXIT_USAGE);
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::usage("usage", e.to_string()))?;
    let header = config::resolved_header(&matches, &cmd);
    let summary = commands::dispatch(cli, header)?;
    println!("{summary}");
    Ok(0)
}
