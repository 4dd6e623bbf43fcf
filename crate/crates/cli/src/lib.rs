//! `islet`: experiment driver for the Island Model.
//!
//! Reads a TOML experiment config, runs simulations and SMC estimations on a
//! thread pool, and writes CSV tables, SVG charts and a `manifest.json` into
//! the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, ErrorKind, Result};

#[derive(Debug, Parser)]
#[command(name = "islet", version, about = "Island Model experiments with statistical model checking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its per-step trace.
    Simulate(Common),
    /// Estimate the configured query until the CIs are narrow enough.
    Estimate(Common),
    /// Estimate the query once per sweep value.
    Sweep(Common),
    /// Welch-test the configured pairs of sweep values.
    Compare(Common),
    /// Draw estimation CSVs as SVG line charts.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `smc.master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (falls back to ISLET_THREADS, then one per core).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Plot everything recorded in the config's output manifest.
    #[arg(long, required_unless_present = "series")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Estimation CSV to draw, as LABEL=PATH (repeatable).
    #[arg(long, value_name = "LABEL=PATH", conflicts_with = "config")]
    pub series: Vec<String>,
    /// Comparison CSV drawn as a marker row (repeatable).
    #[arg(long, value_name = "PATH", requires = "series")]
    pub comparison: Vec<PathBuf>,
    /// Output file for --series mode.
    #[arg(long, requires = "series")]
    pub svg: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub title: String,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => commands::simulate(&c),
        Command::Estimate(c) => commands::estimate(&c),
        Command::Sweep(c) => commands::sweep(&c),
        Command::Compare(c) => commands::compare(&c),
        Command::Plot(p) => commands::plot(&p),
    }
}
