//! Command-line harness around `roiquant-core`: preprocessing, metrics,
//! external-encoder sweeps and a stub detector, plus the bundled Motion-JPEG
//! reference encoder used when no system encoder is installed.

pub mod args;
pub mod config;
pub mod exit;
pub mod metrics_cmd;
pub mod mjpeg;
pub mod process;
pub mod source;
pub mod stub;
pub mod sweep;
pub mod template;

use args::{Cli, Command};

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Process(a) => process::run(&a).map(|_| 0),
        Command::Metrics(a) => metrics_cmd::run(&a).map(|_| 0),
        Command::Sweep(a) => sweep::run(&a),
        Command::StubDetect(a) => stub::run(&a).map(|_| 0),
    }
}
