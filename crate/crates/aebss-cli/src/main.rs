//! `aebss` — synthesize, separate and locate continuous acoustic-emission
//! sources on a 1-D band.
//!
//! Machine-readable JSON goes to stdout; diagnostics and timings go to
//! stderr (set `AEBSS_LOG=info` or `debug` for more detail). Exit codes:
//! 0 success, 2 input error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use aebss_cli::{
    cmd_ccf, cmd_locate, cmd_pipeline, cmd_separate, cmd_synth, CliError,
    DEFAULT_PROTOTYPE_SPACING_M,
};
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "aebss",
    version,
    about = "Blind separation and location of continuous acoustic-emission sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a scenario into a sensor record plus ground truth.
    Synth {
        /// Scenario description (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Seed offset mixed into every per-source seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for output files.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Estimate one delay by cross-correlation and locate it on the band.
    Ccf {
        /// Sensor record: JSON header or CSV (one column per channel).
        #[arg(long)]
        record: PathBuf,
        /// Band geometry (JSON).
        #[arg(long)]
        geometry: PathBuf,
        /// Distance between prototype positions, meters.
        #[arg(long, default_value_t = DEFAULT_PROTOTYPE_SPACING_M)]
        prototypes_spacing: f64,
        /// Kernel width in seconds (default: median prototype delay gap).
        #[arg(long)]
        sigma: Option<f64>,
        /// Directory for output files.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Unmix a two-channel record into its sources.
    Separate {
        /// Sensor record (JSON header format).
        #[arg(long)]
        record: PathBuf,
        /// Learning configuration (JSON); omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for output files.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Place sources on the band from mixing filters or plain delays.
    Locate {
        /// Mixing filter matrix (JSON), as written by `separate`.
        #[arg(long, conflicts_with = "delays")]
        filters: Option<PathBuf>,
        /// Delays document (JSON): {"delays_s": [...]}.
        #[arg(long)]
        delays: Option<PathBuf>,
        /// Band geometry (JSON).
        #[arg(long)]
        geometry: PathBuf,
        /// Distance between prototype positions, meters.
        #[arg(long, default_value_t = DEFAULT_PROTOTYPE_SPACING_M)]
        prototypes_spacing: f64,
        /// Kernel width in seconds (default: median prototype delay gap).
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Full comparison: synth, then ccf and separate+locate, against truth.
    Pipeline {
        /// Scenario description (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Learning configuration (JSON); omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed offset mixed into every per-source seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for output files.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn to_stdout<T: Serialize>(report: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(report)
        .map_err(|err| CliError::Input(format!("cannot serialize report: {err}")))
}

fn run(command: Command) -> Result<String, CliError> {
    match command {
        Command::Synth {
            scenario,
            seed,
            out_dir,
        } => to_stdout(&cmd_synth(&scenario, seed, &out_dir)?),
        Command::Ccf {
            record,
            geometry,
            prototypes_spacing,
            sigma,
            out_dir,
        } => to_stdout(&cmd_ccf(
            &record,
            &geometry,
            prototypes_spacing,
            sigma,
            &out_dir,
        )?),
        Command::Separate {
            record,
            config,
            out_dir,
        } => to_stdout(&cmd_separate(&record, config.as_deref(), &out_dir)?),
        Command::Locate {
            filters,
            delays,
            geometry,
            prototypes_spacing,
            sigma,
        } => to_stdout(&cmd_locate(
            filters.as_deref(),
            delays.as_deref(),
            &geometry,
            prototypes_spacing,
            sigma,
        )?),
        Command::Pipeline {
            scenario,
            config,
            seed,
            out_dir,
        } => to_stdout(&cmd_pipeline(
            &scenario,
            config.as_deref(),
            seed,
            &out_dir,
        )?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("AEBSS_LOG", "warn"))
        .format_timestamp(None)
        .init();

    // Clap's own error path (unknown flag, missing value) exits with
    // code 2, which is also this tool's input-error code.
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(json) => {
            println!("{json}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
