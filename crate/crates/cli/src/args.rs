use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "lacpump", version, about = "Optically pumped nuclear polarization at the NV excited-state LAC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenenergies and mixing of the excited-state Hamiltonian over the sweep.
    Eigen(CommonArgs),
    /// Flip probabilities and steady-state polarization over the sweep.
    Polarization(CommonArgs),
    /// Fit the depolarization ratio k to measured P(B) data.
    FitKratio(FitArgs),
    /// Synthesize (and refit) ODMR spectra and extract the polarization.
    Spectrum(CommonArgs),
    /// Selective Rabi nutation traces on both hyperfine lines.
    Rabi(CommonArgs),
    /// Monte Carlo ensemble pumping over the sweep.
    Mc(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eigen(_) => "eigen",
            Command::Polarization(_) => "polarization",
            Command::FitKratio(_) => "fit-kratio",
            Command::Spectrum(_) => "spectrum",
            Command::Rabi(_) => "rabi",
            Command::Mc(_) => "mc",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Eigen(c) | Command::Polarization(c) | Command::Spectrum(c) | Command::Rabi(c) | Command::Mc(c) => {
                c
            }
            Command::FitKratio(f) => &f.common,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration; defaults are used for anything left out.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Sweep start, Gauss.
    #[arg(long, allow_negative_numbers = true)]
    pub b_min: Option<f64>,
    /// Sweep end (inclusive), Gauss.
    #[arg(long, allow_negative_numbers = true)]
    pub b_max: Option<f64>,
    /// Sweep step, Gauss.
    #[arg(long)]
    pub b_step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides { b_min: self.b_min, b_max: self.b_max, b_step: self.b_step, seed: self.seed, out: self.out.clone() }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// CSV with columns b_gauss,p,sigma.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
}
