use std::io::Write;
use std::process::ExitCode;

use ddmag_cli::run_cli;

fn main() -> ExitCode {
    configure_threads();
    let outcome = run_cli(std::env::args_os());
    let _ = std::io::stdout().write_all(&outcome.stdout);
    let _ = std::io::stderr().write_all(&outcome.stderr);
    ExitCode::from(outcome.code)
}

/// Sizes the global worker pool from `--threads` before any work starts.
#[cfg(feature = "parallel")]
fn configure_threads() {
    use clap::Parser;
    if let Ok(cli) = ddmag_cli::Cli::try_parse() {
        if let Some(n) = cli.threads.filter(|&n| n > 0) {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() {}
