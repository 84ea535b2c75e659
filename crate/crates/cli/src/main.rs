//! `qdtele`: config-driven simulation, correlation, fitting and
//! teleportation reports.

mod commands;
mod config;
mod fit;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdtele_core::stream::Channel;
use qdtele_core::Error;

use commands::{CorrelateMode, EventFormat};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "qdtele", version, about = "Quantum-dot photon statistics: simulate, correlate, fit, report")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set sim.seed=7`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; otherwise the config's `output_dir`, then
    /// `$QDTELE_OUTPUT_DIR`, then `./qdtele-out`.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate click streams (or the fringe table) for the configured topology.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "ttag")]
        format: EventFormat,
    },
    /// Histogram recorded or simulated time-tag files.
    Correlate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "g2")]
        mode: CorrelateMode,
        /// Channels: `a,b` for g2, `trigger,c2,c3` for g3, `h,v,p,q` for fidelity.
        #[arg(long, value_delimiter = ',')]
        channels: Option<Vec<Channel>>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Fit a model to a table or histogram (tpi takes co then cross).
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: String,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Per-state and mean teleportation fidelity over window sizes.
    TeleportReport {
        #[command(flatten)]
        common: Common,
        /// Read `teleport_<state>.ttag` files instead of simulating.
        #[arg(long)]
        input_dir: Option<PathBuf>,
    },
    /// Print the tool and file-format versions.
    Version,
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    match &common.config {
        Some(p) => ExperimentConfig::load(p, &common.overrides),
        None if common.overrides.is_empty() => Ok(ExperimentConfig::analysis_only()),
        None => {
            let text = toml::to_string(&ExperimentConfig::analysis_only()).expect("config serializes");
            ExperimentConfig::parse(&text, "defaults", &common.overrides)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::Config(_) => 2,
        Error::Io(_) => 3,
        Error::Format { .. } | Error::Undefined(_) | Error::Numerical(_) => 4,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let done = match cli.command {
        Command::Version => {
            println!("qdtele {}", output::VERSION);
            println!("event format TTAG1, fit report format toml");
            return Ok(());
        }
        Command::Simulate { common, format } => {
            let cfg = load(&common)?;
            commands::cmd_simulate(&cfg, common.out.as_deref(), format)?
        }
        Command::Correlate { common, mode, channels, inputs } => {
            let cfg = load(&common)?;
            commands::cmd_correlate(&cfg, &inputs, mode, channels.as_deref(), common.out.as_deref())?
        }
        Command::Fit { common, model, inputs } => {
            let cfg = load(&common)?;
            fit::cmd_fit(&cfg, &model, &inputs, common.out.as_deref())?
        }
        Command::TeleportReport { common, input_dir } => {
            let cfg = load(&common)?;
            report::cmd_teleport_report(&cfg, input_dir.as_deref(), common.out.as_deref())?
        }
    };
    println!("wrote {}", done.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
