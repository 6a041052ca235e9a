//! `fibreflow` command-line tool.
//!
//! ```text
//! fibreflow pde   --config <path> [--out <dir>]
//! fibreflow tw    --config <path> [--guess <csv>] [--resample] [--out <csv>]
//! fibreflow check --dir <path>
//! ```
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 solver failure,
//! 3 mismatch or failed certification in `check`.

mod commands;
pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_check, cmd_pde, cmd_tw, CheckOutcome, TwOptions};
pub use config::{CaseFile, GuessSpec, TwSection};

use crate::error::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_SOLVER: u8 = 2;
pub const EXIT_MISMATCH: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "fibreflow", version, about = "Liquid films on a vertical fibre")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the transient model and write trajectory, diagnostics and a
    /// run summary.
    Pde {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for a periodic travelling wave and write its profile.
    Tw {
        #[arg(long)]
        config: PathBuf,
        /// Start from a stored profile instead of the configured guess.
        #[arg(long)]
        guess: Option<PathBuf>,
        /// Interpolate a guess on a different mesh onto the configured grid.
        #[arg(long)]
        resample: bool,
        /// Profile path (overrides `tw.out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute and re-certify the diagnostics of a `pde` output directory.
    Check {
        #[arg(long)]
        dir: PathBuf,
    },
}

/// Exit code for an error escaping a command.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Io { .. } | Error::Parse { .. } | Error::InvalidParameter(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_SOLVER,
    }
}

/// Parse `args` (program name first), run the command and return its exit
/// code. Diagnostics go to stderr, one-line results to stdout.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Pde { config, out } => cmd_pde(&config, out.as_deref()),
        Command::Tw {
            config,
            guess,
            resample,
            out,
        } => cmd_tw(
            &config,
            &TwOptions {
                guess,
                resample,
                out,
            },
        ),
        Command::Check { dir } => cmd_check(&dir).code(),
    }
}
