mod args;
mod commands;
mod config;
mod output;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;

/// Exit code for invalid input, failed certification or a failed check.
const EXIT_INVALID: u8 = 1;
/// Exit code for numerical failures such as unconverged quadrature.
const EXIT_NUMERICAL: u8 = 2;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::validation(format!("cannot write `{}`: {err}", path.display()))
    }

    /// The result was emitted but reports a failure; nothing more to print.
    pub fn silent(code: u8) -> Self {
        Self {
            code,
            message: String::new(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<bshrink::Error> for CliError {
    fn from(e: bshrink::Error) -> Self {
        if e.is_numerical() {
            Self::numerical(e.to_string())
        } else {
            Self::validation(e.to_string())
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("BSHRINK_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::validation(format!("BSHRINK_THREADS must be a positive integer, got `{v}`")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::validation("thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let argv = config::expand_argv(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_INVALID,
            };
            let _ = e.print();
            return Err(CliError::silent(code));
        }
    };
    configure_threads(cli.threads)?;
    commands::dispatch(cli.command)
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.message.is_empty() {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_exit_codes() {
        let numerical = CliError::from(bshrink::Error::Quadrature { value: 1.0, error: 0.5 });
        assert_eq!(numerical.code, EXIT_NUMERICAL);
        assert_eq!(CliError::from(bshrink::Error::Singular("w = 0".into())).code, EXIT_NUMERICAL);
        let invalid = CliError::from(bshrink::Error::DimensionMismatch { expected: 4, got: 3 });
        assert_eq!(invalid.code, EXIT_INVALID);
        assert_eq!(CliError::from(bshrink::Error::Divergent("E[W^-3]".into())).code, EXIT_INVALID);
    }
}
