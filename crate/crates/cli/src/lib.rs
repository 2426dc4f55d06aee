//! Command-line front end for the converter model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{canonical_hash, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::output::{Format, OutputSet};

#[derive(Debug, Parser)]
#[command(
    name = "magnonlink",
    version,
    about = "Microwave-optical conversion through cavity magnonics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a reflection or conversion trace.
    Simulate(CommonArgs),
    /// Evaluate a spectrum over probe frequency and coil current.
    Sweep(CommonArgs),
    /// Fit a measured or synthesized trace.
    Fit(CommonArgs),
    /// Derive coupling rates from material and geometry.
    DeriveParams(CommonArgs),
    /// Calibrate the optomagnonic coupling from a shot-noise measurement.
    CalibrateShotnoise(CommonArgs),
    /// Extract the detection-chain transfer function.
    CalibrateChain(CommonArgs),
    /// Locate the efficiency maximum over the two detunings.
    OptimizeDetuning(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration; defaults are used when omitted.
    config: Option<PathBuf>,
    /// Override one configuration value, e.g. `system.g_hz=60e6`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::Simulate(a) => ("simulate", a),
            Command::Sweep(a) => ("sweep", a),
            Command::Fit(a) => ("fit", a),
            Command::DeriveParams(a) => ("derive-params", a),
            Command::CalibrateShotnoise(a) => ("calibrate-shotnoise", a),
            Command::CalibrateChain(a) => ("calibrate-chain", a),
            Command::OptimizeDetuning(a) => ("optimize-detuning", a),
        }
    }
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let n = match std::env::var("MAGNONLINK_THREADS") {
        Ok(s) => s.trim().parse::<usize>().map_err(|_| {
            CliError::Usage(format!(
                "MAGNONLINK_THREADS: expected a non-negative integer, got {s:?}"
            ))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn dispatch(cmd: &Command) -> CliResult<Outcome> {
    let (name, args) = cmd.parts();
    let cfg: LoadedConfig = config::load(args.config.as_deref(), &args.set)?;
    let out = OutputSet::new(&args.out, name, &canonical_hash(&cfg.config));
    let run = match cmd {
        Command::Simulate(_) => commands::simulate,
        Command::Sweep(_) => commands::sweep,
        Command::Fit(_) => commands::fit,
        Command::DeriveParams(_) => commands::derive_params,
        Command::CalibrateShotnoise(_) => commands::calibrate_shotnoise,
        Command::CalibrateChain(_) => commands::calibrate_chain,
        Command::OptimizeDetuning(_) => commands::optimize_detuning,
    };
    thread_pool()?.install(|| run(&cfg, out, args.format))
}

/// Runs the CLI and returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let first = e.to_string();
            let line = first
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", CliError::Usage(line.to_string()).record());
            return 1;
        }
    };
    let result = dispatch(&cli.command).and_then(|o| {
        o.outputs.write()?;
        for line in &o.stdout {
            let _ = writeln!(stdout, "{line}");
        }
        match o.deferred {
            Some(e) => Err(e),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.record());
            e.exit_code()
        }
    }
}
