use lacpump::pumping::nuclear_zeeman_khz;
use lacpump::{
    effective_temperature, evolve_polarization, flip_probabilities, lac_position, steady_state_polarization,
    FieldConfig, PumpingError,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::OutputDir;
use crate::Outcome;

pub const HEADER: [&str; 5] = ["b_gauss", "p_plus", "p_minus", "omega_mhz", "p_steady"];
pub const ODE_COLUMN: &str = "p_ode";

#[derive(Debug, Serialize)]
struct Extremum {
    b_gauss: f64,
    p: f64,
    /// Effective ¹⁵N spin temperature at this point, K (null at P = 0).
    t_eff_kelvin: Option<f64>,
}

#[derive(Debug, Serialize)]
struct OdeSummary {
    t_end: f64,
    dt: f64,
    max_abs_deviation: f64,
}

#[derive(Debug, Serialize)]
struct PolarizationReport {
    rows: usize,
    k_ratio: f64,
    convention: lacpump::HyperfineConvention,
    lac_gauss: f64,
    p_at_lac: f64,
    max: Extremum,
    min: Extremum,
    /// Points where Ω < 1/(2π τ_es): precession slower than the
    /// excited-state decay, so the averaged flip probability is optimistic.
    slow_precession_points: usize,
    ode: Option<OdeSummary>,
}

fn numeric(e: PumpingError) -> CliError {
    match e {
        PumpingError::InvalidArgument(m) => CliError::Config(m),
        other => CliError::NonConvergence(other.to_string()),
    }
}

fn extremum(b: f64, p: f64) -> Extremum {
    let t = effective_temperature(p, nuclear_zeeman_khz(FieldConfig::gauss(b))).ok().filter(|t| t.is_finite());
    Extremum { b_gauss: b, p, t_eff_kelvin: t }
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let params = &cfg.spin_core;
    let pump = &cfg.pumping;
    let fields = cfg.cli.sweep.points();

    let rows: Vec<(Vec<f64>, bool)> = fields
        .par_iter()
        .map(|&b| {
            let field = FieldConfig::gauss(b);
            let f = flip_probabilities(params, field);
            let p = steady_state_polarization(params, field).map_err(numeric)?.p;
            let mut row = vec![b, f.p_plus, f.p_minus, f.omega, p];
            if pump.ode {
                let traj = evolve_polarization(params, field, 0.0, pump.t_end, pump.dt).map_err(numeric)?;
                row.push(traj.last().map_or(0.0, |s| s.state.p));
            }
            Ok((row, f.fast_precession))
        })
        .collect::<Result<_>>()?;

    let mut header = HEADER.to_vec();
    if pump.ode {
        header.push(ODE_COLUMN);
    }
    let (mut max, mut min) = ((f64::NAN, f64::NEG_INFINITY), (f64::NAN, f64::INFINITY));
    let mut max_dev: f64 = 0.0;
    for (row, _) in &rows {
        if row[4] > max.1 {
            max = (row[0], row[4]);
        }
        if row[4] < min.1 {
            min = (row[0], row[4]);
        }
        if pump.ode {
            max_dev = max_dev.max((row[5] - row[4]).abs());
        }
    }
    let lac = lac_position(params).map_err(CliError::config)?.field_gauss;
    let p_at_lac = steady_state_polarization(params, FieldConfig::gauss(lac)).map_err(numeric)?.p;
    let report = PolarizationReport {
        rows: rows.len(),
        k_ratio: params.k_ratio,
        convention: params.convention,
        lac_gauss: lac,
        p_at_lac,
        max: extremum(max.0, max.1),
        min: extremum(min.0, min.1),
        slow_precession_points: rows.iter().filter(|(_, fast)| !fast).count(),
        ode: pump.ode.then_some(OdeSummary { t_end: pump.t_end, dt: pump.dt, max_abs_deviation: max_dev }),
    };

    let table: Vec<Vec<f64>> = rows.into_iter().map(|(r, _)| r).collect();
    out.write_table("polarization.csv", &header, &table)?;
    out.write_json("polarization.json", &report)?;
    if cfg.cli.gnuplot {
        let ode = if pump.ode { ", \"\" using 1:6 with points pt 7 ps 0.3" } else { "" };
        out.write_text(
            "polarization.gp",
            &format!(
                "set datafile separator \",\"\nset key autotitle columnhead\nset xlabel \"B (G)\"\nset ylabel \"P\"\n\
                 plot \"polarization.csv\" using 1:5 with lines{ode}\npause mouse close\n"
            ),
        )?;
    }

    let mut notes = vec![format!("max P = {:.4} at {} G", max.1, max.0)];
    if pump.ode && max_dev > 1e-6 {
        notes.push(format!("ODE deviates from the closed form by {max_dev:.3e}; increase t_end"));
    }
    Ok(Outcome { notes, failures: Vec::new() })
}
