//! Batch front-end for `coarse-core`.
//!
//! Every subcommand reads one JSON config (or its defaults), applies the
//! global flag overrides, and writes CSV profiles, JSON reports and raw bit
//! files into an output directory. Reports carry a hash of the resolved
//! config, so a directory can always be traced back to the run that made it.

pub mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{CommandConfig, Loaded, Overrides, RunParams};
pub use error::CliError;
pub use output::{OutDir, Provenance, OUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "coarse", version, about = "Finite-horizon density and coarse computability experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Density profile, dyadic blocks and windowed estimates of a generator.
    Density(Common),
    /// Factorial-interval code of a set, optional corruption, majority decoding.
    CodeDecode(Common),
    /// Blockwise trust merge of an approximating family.
    Trust(Common),
    /// Diagonal defeat of an opponent library, optionally the non-extremal set.
    Adversary(Common),
    /// Stage simulation of a permitting construction.
    Stage(Common),
    /// Spectrum transform through a monotone map.
    Spectrum(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config; defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub tail_start: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory. Defaults to `$COARSE_OUT_DIR/<command>`, else `coarse-out/<command>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How a command that produced its outputs ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Outputs are written but some search or horizon cap cut the run short.
    CapLimited(String),
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            horizon: self.horizon,
            tail_start: self.tail_start,
            seed: self.seed,
        }
    }
}

fn dispatch<C: CommandConfig>(
    common: &Common,
    body: fn(&Loaded<C>, &OutDir) -> Result<Outcome, CliError>,
) -> Result<Outcome, CliError> {
    let loaded = config::load::<C>(common.config.as_deref(), &common.overrides())?;
    let out = OutDir::create(output::resolve_out_dir(common.out.as_deref(), C::NAME))?;
    out.json("config.json", &loaded.config)?;
    body(&loaded, &out)
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    use commands::*;
    match &cli.command {
        Command::Density(c) => dispatch(c, density::run),
        Command::CodeDecode(c) => dispatch(c, code_decode::run),
        Command::Trust(c) => dispatch(c, trust::run),
        Command::Adversary(c) => dispatch(c, adversary::run),
        Command::Stage(c) => dispatch(c, stage::run),
        Command::Spectrum(c) => dispatch(c, spectrum::run),
    }
}
