//! Selective nutation on both hyperfine lines; the contrast ratio of the
//! two traces measures the nuclear polarization.

use lacpump::{
    fit_rabi, ground_esr_frequencies, steady_state_polarization, synthesize_rabi, FieldConfig, RabiFit, RabiLine,
    RabiTrace,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::OutputDir;
use crate::Outcome;

pub const HEADER: [&str; 2] = ["time_us", "signal"];

#[derive(Debug, Serialize)]
struct LineReport {
    line: RabiLine,
    file: &'static str,
    mw_frequency_mhz: f64,
    occupation: f64,
    contrast: f64,
    fit: Option<RabiFit>,
    fit_error: Option<String>,
}

#[derive(Debug, Serialize)]
struct RabiReport {
    field_gauss: f64,
    polarization: f64,
    rabi_frequency_mhz: f64,
    noise: f64,
    /// C↑/C↓ = (1 − P)/(1 + P).
    expected_ratio: f64,
    synthesized_ratio: f64,
    fitted_ratio: Option<f64>,
    /// P recovered from the fitted contrasts.
    fitted_polarization: Option<f64>,
    lines: [LineReport; 2],
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let r = &cfg.spectra.rabi;
    let field = FieldConfig::gauss(r.field);
    let p = match r.polarization {
        Some(p) => p,
        None => {
            steady_state_polarization(&cfg.spin_core, field).map_err(|e| CliError::NonConvergence(e.to_string()))?.p
        }
    };
    let esr = ground_esr_frequencies(&cfg.spin_core, field, cfg.spectra.manifold);
    let n = (r.periods * r.samples_per_period as f64).round() as usize;
    let dt = 1.0 / (r.rabi_frequency * r.samples_per_period as f64);
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();

    let mut outcome = Outcome::default();
    let mut trace = |line: RabiLine, mw: f64, seed: u64, file: &'static str| -> Result<(RabiTrace, LineReport)> {
        let mut t = synthesize_rabi(p, line, mw, r.rabi_frequency, r.esr_contrast, &times).map_err(CliError::config)?;
        if r.noise > 0.0 {
            t = t.with_noise(r.noise, seed).map_err(CliError::config)?;
        }
        let (fit, fit_error) = match fit_rabi(&t) {
            Ok(f) if f.converged => (Some(f), None),
            Ok(f) => (Some(f), Some("did not converge".to_string())),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(e) = &fit_error {
            outcome.failures.push(format!("rabi fit on {line:?} line: {e}"));
        }
        let report = LineReport {
            line,
            file,
            mw_frequency_mhz: mw,
            occupation: line.occupation(p),
            contrast: t.contrast,
            fit,
            fit_error,
        };
        Ok((t, report))
    };
    let (up, up_report) = trace(RabiLine::Up, esr.up, cfg.cli.seed, "rabi_up.csv")?;
    let (down, down_report) = trace(RabiLine::Down, esr.down, cfg.cli.seed.wrapping_add(1), "rabi_down.csv")?;

    for t in [&up, &down] {
        let rows: Vec<Vec<f64>> = t.times.iter().zip(&t.signal).map(|(&x, &y)| vec![x, y]).collect();
        let name = if t.line == RabiLine::Up { "rabi_up.csv" } else { "rabi_down.csv" };
        out.write_table(name, &HEADER, &rows)?;
    }
    let fitted_ratio = match (&up_report.fit, &down_report.fit) {
        (Some(u), Some(d)) if d.contrast > 0.0 => Some(u.contrast / d.contrast),
        _ => None,
    };
    let report = RabiReport {
        field_gauss: r.field,
        polarization: p,
        rabi_frequency_mhz: r.rabi_frequency,
        noise: r.noise,
        expected_ratio: (1.0 - p) / (1.0 + p),
        synthesized_ratio: up.contrast / down.contrast,
        fitted_ratio,
        fitted_polarization: fitted_ratio.map(|q| (1.0 - q) / (1.0 + q)),
        lines: [up_report, down_report],
    };
    out.write_json("rabi.json", &report)?;
    if cfg.cli.gnuplot {
        out.write_text(
            "rabi.gp",
            "set datafile separator \",\"\nset key autotitle columnhead\nset xlabel \"t (us)\"\nset ylabel \"PL (norm.)\"\n\
             plot \"rabi_up.csv\" using 1:2 with linespoints, \"rabi_down.csv\" using 1:2 with linespoints\npause mouse close\n",
        )?;
    }
    outcome.notes.push(format!(
        "P = {p:.4}, contrast ratio {:.5} (expected {:.5})",
        report.synthesized_ratio, report.expected_ratio
    ));
    Ok(outcome)
}
