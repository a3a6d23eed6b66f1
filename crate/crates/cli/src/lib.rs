//! Command-line front end of the ddmag toolkit: run configuration, dispatch
//! to the analysis library, and figure-ready CSV/JSON output with the full
//! resolved configuration embedded.

pub mod args;
pub mod config;
pub mod error;
pub mod run;

use std::ffi::OsString;
use std::fs;

use clap::error::ErrorKind;
use clap::Parser;
use ddmag_core::Execution;

pub use args::Cli;
pub use config::{CommandKind, RunConfig};
pub use error::CliError;
pub use run::{execute, Output};

/// Published JSON schema of [`RunConfig`].
pub fn config_schema() -> String {
    let schema = schemars::schema_for!(RunConfig);
    let mut text = serde_json::to_string_pretty(&schema).expect("schema serializes");
    text.push('\n');
    text
}

/// Process outcome: exit code and the bytes destined for stdout and stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: u8,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
}

impl Outcome {
    fn failure(err: &CliError) -> Self {
        Outcome {
            code: err.exit_code(),
            stdout: Vec::new(),
            stderr: format!("{}\n", err.to_json()).into_bytes(),
        }
    }
}

/// Parses `args` (program name first), runs the command and collects its
/// output. Files named by `--out` are written here; the thread count is
/// left to the caller.
pub fn run_cli<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => Outcome {
                    code: 0,
                    stdout: e.render().to_string().into_bytes(),
                    stderr: Vec::new(),
                },
                _ => Outcome::failure(&CliError::Config(e.render().to_string().trim().to_string())),
            };
        }
    };
    match dispatch(&cli) {
        Ok(o) => o,
        Err(e) => Outcome::failure(&e),
    }
}

/// Resolved configuration for a parsed command line.
pub fn resolve_config(cli: &Cli) -> Result<Option<RunConfig>, CliError> {
    let Some((command, run_args)) = cli.command.split() else {
        return Ok(None);
    };
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    let merged = file.overlay(&cli.flags_config(run_args));
    merged.resolve(command).map(Some)
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    if cli.threads == Some(0) {
        return Err(CliError::Config("--threads must be >= 1".into()));
    }
    let Some(cfg) = resolve_config(cli)? else {
        return Ok(Outcome {
            code: 0,
            stdout: config_schema().into_bytes(),
            stderr: Vec::new(),
        });
    };
    let output = execute(&cfg, Execution::Parallel)?;
    let mut stderr = Vec::new();
    for w in &output.warnings {
        stderr.extend_from_slice(
            format!("{}\n", serde_json::json!({ "warning": w })).as_bytes(),
        );
    }
    let stdout = match &cfg.out {
        Some(path) => {
            fs::write(path, &output.document)
                .map_err(|e| CliError::Io(format!("cannot write {path}: {e}")))?;
            Vec::new()
        }
        None => output.document,
    };
    Ok(Outcome {
        code: 0,
        stdout,
        stderr,
    })
}
