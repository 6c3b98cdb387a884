//! `mmbo` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmbo_core::HEquation;

#[derive(Debug, Parser)]
#[command(name = "mmbo", version, about = "Forced integrate-and-fire-or-burst simulations and burst statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single trial: spike times, bursts and an optional (t, v, h) trajectory.
    Simulate {
        /// Record the trajectory.
        #[arg(long)]
        trajectory: bool,
        /// Steps between stored trajectory samples.
        #[arg(long)]
        record_stride: Option<usize>,
    },
    /// Trial ensembles over a list of noise intensities.
    SweepNoise,
    /// Mean spikes per burst over a (v0, h0) grid.
    SweepGrid {
        /// Use the 2 mV x 0.04 preset resolution.
        #[arg(long)]
        coarse: bool,
        #[arg(long, value_name = "MV")]
        v0_step: Option<f64>,
        #[arg(long, value_name = "FRAC")]
        h0_step: Option<f64>,
    },
    /// Pooled ISI histograms and trough detection per noise intensity.
    Isih,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML or JSON run configuration (a written manifest works too).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, allow_hyphen_values = true, value_name = "MV")]
    pub v0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true, value_name = "FRAC")]
    pub h0: Option<f64>,
    /// Noise intensity D; sweeps accept a comma-separated list.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub noise: Vec<f64>,
    #[arg(long, global = true)]
    pub duration_ms: Option<f64>,
    /// Step size [default: 0.02]
    #[arg(long, global = true)]
    pub dt_ms: Option<f64>,
    /// [default: 80]
    #[arg(long, global = true)]
    pub isi_threshold_ms: Option<f64>,
    /// [default: 1]
    #[arg(long, global = true)]
    pub binwidth_ms: Option<f64>,
    /// [default: 100]
    #[arg(long, global = true)]
    pub transient_ms: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_h_equation)]
    pub h_equation: Option<HEquation>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

fn parse_h_equation(s: &str) -> Result<HEquation, String> {
    s.parse().map_err(|e: mmbo_core::ConfigError| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
