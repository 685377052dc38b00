//! Spectrum pipeline: line positions → populations → synthesis → refit →
//! polarization. Each spectrum is independent; a failed fit is recorded in
//! the report and the batch continues.

use lacpump::io::write_spectrum_csv;
use lacpump::lm::LmOptions;
use lacpump::spectra::{assign_labels, window_grid, LineUncertainty};
use lacpump::{
    extract_polarization, fit_spectrum, ground_esr_frequencies, polarization_summary, steady_state_polarization,
    synthesize_spectrum, two_spin_line_positions, two_spin_steady_state, FieldConfig, FitOptions, FittedSpectrum,
    InitStrategy, JointPolarization, LorentzianLine, PolarizationEstimate, SpectraError, Spectrum, SpinConfig,
    SynthesisOptions, TwoSpinPopulations,
};
use rayon::prelude::*;
use serde::Serialize;

use super::field_tag;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::OutputDir;
use crate::Outcome;

pub const UP: &str = "up";
pub const DOWN: &str = "down";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    SingleSpin,
    TwoSpin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    /// Best-so-far parameters are reported.
    NotConverged,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub status: FitStatus,
    pub error: Option<String>,
    pub baseline: Option<f64>,
    pub residual_norm: Option<f64>,
    pub iterations: Option<usize>,
    pub lines: Vec<LorentzianLine>,
    pub uncertainties: Option<Vec<LineUncertainty>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRecord {
    pub index: usize,
    pub kind: Kind,
    pub field_gauss: f64,
    pub seed: u64,
    pub synthesized_file: String,
    pub fitted_file: Option<String>,
    /// Input polarization (single spin) or marginals (two spins).
    pub model_polarization: Option<f64>,
    pub model_populations: Option<[[f64; 2]; 2]>,
    pub true_lines: Vec<LorentzianLine>,
    pub clipped: bool,
    pub fit: FitSummary,
    /// Single spin: P from the fitted line areas.
    pub extracted: Option<PolarizationEstimate>,
    /// Two spins: joint polarization of the pumped configuration (target
    /// vs. all other lines) from the fitted areas, with P_N·P_C alongside.
    pub extracted_joint: Option<JointPolarization>,
    pub model_joint: Option<JointPolarization>,
    pub deviation: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SpectrumReport<'a> {
    /// Definition used for the two-spin joint polarization.
    joint_definition: &'static str,
    target_configuration: String,
    spectra: &'a [SpectrumRecord],
}

struct Job {
    index: usize,
    kind: Kind,
    b: f64,
    seed: u64,
}

struct Built {
    record: SpectrumRecord,
    synthesized: Spectrum,
    fitted: Option<FittedSpectrum>,
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let mut jobs: Vec<Job> = Vec::new();
    for &b in &cfg.spectra.fields {
        jobs.push(Job { index: jobs.len(), kind: Kind::SingleSpin, b, seed: 0 });
    }
    if cfg.register.enabled {
        for &b in &cfg.register.fields {
            jobs.push(Job { index: jobs.len(), kind: Kind::TwoSpin, b, seed: 0 });
        }
    }
    for job in &mut jobs {
        job.seed = cfg.cli.seed.wrapping_add(job.index as u64);
    }

    let built: Vec<Built> = jobs
        .par_iter()
        .map(|job| match job.kind {
            Kind::SingleSpin => single_spin(cfg, job),
            Kind::TwoSpin => two_spin(cfg, job),
        })
        .collect::<Result<_>>()?;

    let mut outcome = Outcome::default();
    let mut records = Vec::with_capacity(built.len());
    for b in built {
        let name = &b.record.synthesized_file;
        let mut buf = Vec::new();
        write_spectrum_csv(&b.synthesized, &mut buf).map_err(|e| CliError::io(out.path().join(name), e.into()))?;
        out.write_bytes(name, &buf)?;
        if let (Some(f), Some(name)) = (&b.fitted, &b.record.fitted_file) {
            let model = Spectrum {
                intensities: f.spectrum.frequencies.iter().map(|&nu| f.model(nu)).collect(),
                noise_sigma: None,
                ..f.spectrum.clone()
            };
            let mut buf = Vec::new();
            write_spectrum_csv(&model, &mut buf).map_err(|e| CliError::io(out.path().join(name), e.into()))?;
            out.write_bytes(name, &buf)?;
        }
        let r = &b.record;
        match r.fit.status {
            FitStatus::Converged | FitStatus::Skipped => {}
            FitStatus::NotConverged | FitStatus::Failed => outcome.failures.push(format!(
                "spectrum {} ({} G): fit {:?}: {}",
                r.index,
                r.field_gauss,
                r.fit.status,
                r.fit.error.as_deref().unwrap_or("")
            )),
        }
        if let (Some(e), Some(p)) = (&r.extracted, r.model_polarization) {
            outcome.notes.push(format!("{} G: P = {:.4} ± {:.4} (model {p:.4})", r.field_gauss, e.p, e.sigma));
        }
        if let Some(j) = &r.extracted_joint {
            outcome.notes.push(format!("{} G: joint P = {:.4}", r.field_gauss, j.target_vs_rest));
        }
        records.push(b.record);
    }

    out.write_json(
        "spectrum_report.json",
        &SpectrumReport {
            joint_definition: "target_vs_rest",
            target_configuration: SpinConfig::PUMPED.label(),
            spectra: &records,
        },
    )?;
    if cfg.cli.gnuplot {
        let mut gp =
            String::from("set datafile separator \",\"\nset xlabel \"frequency (MHz)\"\nset ylabel \"PL (a.u.)\"\n");
        for r in &records {
            gp.push_str(&format!(
                "plot \"{}\" using 1:2 with points pt 7 ps 0.2 title \"{} G\"",
                r.synthesized_file, r.field_gauss
            ));
            if let Some(f) = &r.fitted_file {
                gp.push_str(&format!(", \"{f}\" using 1:2 with lines title \"fit\""));
            }
            gp.push_str("\npause mouse close\n");
        }
        out.write_text("spectrum.gp", &gp)?;
    }
    Ok(outcome)
}

fn fit_options(cfg: &RunConfig, seed: u64) -> FitOptions {
    let s = &cfg.spectra;
    let tol = s.tolerance;
    FitOptions {
        lm: LmOptions { max_iter: s.max_iter, ftol: tol, xtol: tol, gtol: tol, ..Default::default() },
        shared_width: s.shared_width,
        bootstrap_seed: seed,
        ..Default::default()
    }
}

fn synthesis_options(cfg: &RunConfig, noise_fraction: f64, seed: u64) -> SynthesisOptions {
    let s = &cfg.spectra;
    SynthesisOptions { baseline: s.baseline, noise_sigma: noise_fraction * s.baseline, seed, polarity: s.polarity }
}

fn config_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Fits with guesses at the expected line positions; labels are then
/// reassigned by nearest expected center.
fn fit(
    cfg: &RunConfig,
    spectrum: &Spectrum,
    truth: &[LorentzianLine],
    seed: u64,
) -> (FitSummary, Option<FittedSpectrum>) {
    let s = &cfg.spectra;
    let guess_area = s.total_area / truth.len() as f64;
    let guesses: Vec<LorentzianLine> =
        truth.iter().map(|l| LorentzianLine { area: guess_area, width: s.width, ..l.clone() }).collect();
    let expected: Vec<(&str, f64)> = truth.iter().map(|l| (l.label.as_deref().unwrap_or(""), l.center)).collect();
    let summary = |status, error: Option<String>, f: Option<&FittedSpectrum>| FitSummary {
        status,
        error,
        baseline: f.map(|f| f.baseline),
        residual_norm: f.map(|f| f.residual_norm),
        iterations: f.map(|f| f.iterations),
        lines: f.map(|f| f.lines().to_vec()).unwrap_or_default(),
        uncertainties: f.and_then(|f| f.uncertainties.clone()),
    };
    match fit_spectrum(spectrum, truth.len(), &InitStrategy::Guesses(guesses), &fit_options(cfg, seed)) {
        Ok(mut f) => {
            assign_labels(&mut f, &expected);
            (summary(FitStatus::Converged, None, Some(&f)), Some(f))
        }
        Err(SpectraError::NotConverged { best }) => {
            let mut f = *best;
            assign_labels(&mut f, &expected);
            let msg = format!("no convergence after {} iterations", f.iterations);
            (summary(FitStatus::NotConverged, Some(msg), Some(&f)), Some(f))
        }
        Err(e) => (summary(FitStatus::Failed, Some(e.to_string()), None), None),
    }
}

fn single_spin(cfg: &RunConfig, job: &Job) -> Result<Built> {
    let s = &cfg.spectra;
    let field = FieldConfig::gauss(job.b);
    let p = match s.polarization {
        Some(p) => p,
        None => {
            steady_state_polarization(&cfg.spin_core, field).map_err(|e| CliError::NonConvergence(e.to_string()))?.p
        }
    };
    let esr = ground_esr_frequencies(&cfg.spin_core, field, s.manifold);
    let truth = vec![
        LorentzianLine::new(esr.up, s.width, 0.5 * s.total_area * (1.0 - p)).labeled(UP),
        LorentzianLine::new(esr.down, s.width, 0.5 * s.total_area * (1.0 + p)).labeled(DOWN),
    ];
    let grid = window_grid(&[esr.up, esr.down], s.half_span, s.grid_step);
    let spectrum =
        synthesize_spectrum(&truth, &grid, &synthesis_options(cfg, s.noise, job.seed)).map_err(config_error)?;

    let stem = format!("spectrum_{:02}_{}", job.index, field_tag(job.b));
    let mut record = SpectrumRecord {
        index: job.index,
        kind: job.kind,
        field_gauss: job.b,
        seed: job.seed,
        synthesized_file: format!("{stem}.csv"),
        fitted_file: None,
        model_polarization: Some(p),
        model_populations: None,
        true_lines: truth.clone(),
        clipped: spectrum.clipped,
        fit: FitSummary {
            status: FitStatus::Skipped,
            error: None,
            baseline: None,
            residual_norm: None,
            iterations: None,
            lines: Vec::new(),
            uncertainties: None,
        },
        extracted: None,
        extracted_joint: None,
        model_joint: None,
        deviation: None,
    };
    let mut fitted = None;
    if s.fit {
        let (summary, f) = fit(cfg, &spectrum, &truth, job.seed);
        record.fit = summary;
        if let Some(f) = &f {
            record.fitted_file = Some(format!("{stem}_fit.csv"));
            match extract_polarization(f, UP, DOWN) {
                Ok(e) => {
                    record.deviation = Some((e.p - p).abs());
                    record.extracted = Some(e);
                }
                Err(e) => {
                    record.fit.status = FitStatus::Failed;
                    record.fit.error = Some(format!("polarization extraction: {e}"));
                }
            }
        }
        fitted = f;
    }
    Ok(Built { record, synthesized: spectrum, fitted })
}

fn two_spin(cfg: &RunConfig, job: &Job) -> Result<Built> {
    let s = &cfg.spectra;
    let field = FieldConfig::gauss(job.b);
    let params = cfg.two_spin_params();
    let pops = match cfg.register.populations {
        Some(rho) => TwoSpinPopulations::new(rho).map_err(config_error)?,
        None => two_spin_steady_state(&params, field).map_err(config_error)?,
    };
    let target = SpinConfig::PUMPED;
    let lines = two_spin_line_positions(&params, field, s.manifold);
    let truth: Vec<LorentzianLine> = lines
        .iter()
        .map(|l| LorentzianLine::new(l.frequency, s.width, s.total_area * pops.get(l.config)).labeled(l.config.label()))
        .collect();
    let centers: Vec<f64> = lines.iter().map(|l| l.frequency).collect();
    let grid = window_grid(&centers, s.half_span, s.grid_step);
    let noise = cfg.register.noise.unwrap_or(s.noise);
    let spectrum =
        synthesize_spectrum(&truth, &grid, &synthesis_options(cfg, noise, job.seed)).map_err(config_error)?;

    let model_joint = polarization_summary(&pops, target);
    let stem = format!("spectrum_{:02}_two_spin_{}", job.index, field_tag(job.b));
    let mut record = SpectrumRecord {
        index: job.index,
        kind: job.kind,
        field_gauss: job.b,
        seed: job.seed,
        synthesized_file: format!("{stem}.csv"),
        fitted_file: None,
        model_polarization: None,
        model_populations: Some(pops.rho),
        true_lines: truth.clone(),
        clipped: spectrum.clipped,
        fit: FitSummary {
            status: FitStatus::Skipped,
            error: None,
            baseline: None,
            residual_norm: None,
            iterations: None,
            lines: Vec::new(),
            uncertainties: None,
        },
        extracted: None,
        extracted_joint: None,
        model_joint: Some(model_joint),
        deviation: None,
    };
    let mut fitted = None;
    if s.fit {
        let (summary, f) = fit(cfg, &spectrum, &truth, job.seed);
        record.fit = summary;
        if let Some(f) = &f {
            record.fitted_file = Some(format!("{stem}_fit.csv"));
            let area = |c: SpinConfig| f.line_index(&c.label()).map(|i| f.lines()[i].area);
            let areas: Option<Vec<f64>> = SpinConfig::ALL.iter().map(|&c| area(c)).collect();
            match areas {
                Some(a) if a.iter().sum::<f64>() > 0.0 => {
                    let total: f64 = a.iter().sum();
                    let fitted_pops =
                        TwoSpinPopulations { rho: [[a[0] / total, a[1] / total], [a[2] / total, a[3] / total]] };
                    let joint = polarization_summary(&fitted_pops, target);
                    record.deviation = Some((joint.target_vs_rest - model_joint.target_vs_rest).abs());
                    record.extracted_joint = Some(joint);
                }
                _ => {
                    record.fit.status = FitStatus::Failed;
                    record.fit.error = Some("fitted areas do not define populations".into());
                }
            }
        }
        fitted = f;
    }
    Ok(Built { record, synthesized: spectrum, fitted })
}
