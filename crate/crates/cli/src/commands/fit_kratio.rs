use std::fs::File;

use lacpump::io::read_points_csv;
use lacpump::lm::LmOptions;
use lacpump::{fit_k_ratio, steady_state_polarization, FieldConfig, FitResult, KRatioFitOptions};
use serde::Serialize;

use super::polarization::HEADER;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::OutputDir;
use crate::Outcome;

#[derive(Debug, Serialize)]
struct KRatioReport<'a> {
    points: usize,
    k_ratio: f64,
    std_error: f64,
    /// χ² per degree of freedom; ≈ 1 when the σ column is realistic.
    reduced_chi2: f64,
    fit: &'a FitResult,
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let fit_cfg = &cfg.pumping.fit;
    let path = fit_cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::Usage("fit-kratio needs --data <csv> or pumping.fit.data".into()))?;
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let data = read_points_csv(file).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => CliError::io(path, std::io::Error::other(e.to_string())),
        _ => CliError::Config(format!("{}: {e}", path.display())),
    })?;

    let tol = fit_cfg.tolerance;
    let opts = KRatioFitOptions {
        lm: LmOptions { max_iter: fit_cfg.max_iter, ftol: tol, xtol: tol, gtol: tol, ..Default::default() },
        ..Default::default()
    };
    let fit = fit_k_ratio(&cfg.spin_core, &data, &opts).map_err(CliError::config)?;
    let k = fit.values[0];
    let dof = data.len().saturating_sub(1).max(1) as f64;
    out.write_json(
        "kratio_fit.json",
        &KRatioReport {
            points: data.len(),
            k_ratio: k,
            std_error: fit.std_errors[0],
            reduced_chi2: fit.residual_norm.powi(2) / dof,
            fit: &fit,
        },
    )?;

    let fitted = cfg.spin_core.with_k_ratio(k);
    let curve: Vec<Vec<f64>> = cfg
        .cli
        .sweep
        .points()
        .into_iter()
        .map(|b| {
            let field = FieldConfig::gauss(b);
            let f = lacpump::flip_probabilities(&fitted, field);
            let p = steady_state_polarization(&fitted, field).map(|s| s.p).unwrap_or(f64::NAN);
            vec![b, f.p_plus, f.p_minus, f.omega, p]
        })
        .collect();
    out.write_table("kratio_curve.csv", &HEADER, &curve)?;
    if cfg.cli.gnuplot {
        out.write_text(
            "kratio.gp",
            &format!(
                "set datafile separator \",\"\nset key autotitle columnhead\nset xlabel \"B (G)\"\nset ylabel \"P\"\n\
                 plot \"{}\" using 1:2:3 with yerrorbars, \"kratio_curve.csv\" using 1:5 with lines\npause mouse close\n",
                path.display()
            ),
        )?;
    }

    let mut outcome = Outcome { notes: fit.warnings.clone(), failures: Vec::new() };
    outcome.notes.push(format!("k_ratio = {k:.6} ± {:.6}", fit.std_errors[0]));
    if !fit.converged {
        outcome
            .failures
            .push(format!("k-ratio fit did not converge after {} iterations; result is advisory", fit.iterations));
    }
    Ok(outcome)
}
