//! Command-line front end for the `lacpump` model: parameter sweeps,
//! spectrum pipelines, Monte Carlo runs and the k-ratio fit, written as
//! CSV tables and JSON reports.

// `!(x > 0.0)` is used on purpose: it rejects NaN together with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use args::{Cli, Command, CommonArgs, FitArgs};
pub use config::{Overrides, RunConfig};
pub use error::{CliError, Result};
pub use output::OutputDir;

/// What a command produced besides its files.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    /// Informational remarks, copied into the manifest.
    pub notes: Vec<String>,
    /// Numerical failures that did not stop the run (exit code 2).
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: PathBuf,
    pub outcome: Outcome,
}

/// Loads the configuration, applies overrides and runs the command.
pub fn run(cli: &Cli) -> Result<RunSummary> {
    let common = cli.command.common();
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&common.overrides());
    if let Command::FitKratio(FitArgs { data: Some(data), .. }) = &cli.command {
        cfg.pumping.fit.data = Some(data.clone());
    }
    cfg.validate()?;

    let mut out = OutputDir::create(&cfg.cli.out)?;
    let outcome = match &cli.command {
        Command::Eigen(_) => commands::eigen::run(&cfg, &mut out)?,
        Command::Polarization(_) => commands::polarization::run(&cfg, &mut out)?,
        Command::FitKratio(_) => commands::fit_kratio::run(&cfg, &mut out)?,
        Command::Spectrum(_) => commands::spectrum::run(&cfg, &mut out)?,
        Command::Rabi(_) => commands::rabi::run(&cfg, &mut out)?,
        Command::Mc(_) => commands::mc::run(&cfg, &mut out)?,
    };
    let out_dir = out.path().to_path_buf();
    let mut notes = outcome.notes.clone();
    notes.extend(outcome.failures.iter().map(|f| format!("failure: {f}")));
    let manifest = out.finish(cli.command.name(), &cfg, &notes)?;
    Ok(RunSummary { out_dir, manifest, outcome })
}

/// Parses `args`, runs, reports to stderr and returns the exit code:
/// 0 success, 1 usage/config, 2 numerical non-convergence, 3 I/O.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(summary) => {
            for note in &summary.outcome.notes {
                log::info!("{note}");
            }
            eprintln!("wrote {}", summary.manifest.display());
            if summary.outcome.failures.is_empty() {
                0
            } else {
                for f in &summary.outcome.failures {
                    eprintln!("error: {f}");
                }
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
