use lacpump::{build_excited_hamiltonian, eigenstructure, lac_position, numeric_eigenstructure, FieldConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::OutputDir;
use crate::Outcome;

pub const HEADER: [&str; 8] = ["b_gauss", "e1_mhz", "e2_mhz", "e3_mhz", "e4_mhz", "alpha", "beta", "pmix"];

#[derive(Debug, Serialize)]
struct FieldValue {
    b_gauss: f64,
    value: f64,
}

#[derive(Debug, Serialize)]
struct EigenReport {
    rows: usize,
    convention: lacpump::HyperfineConvention,
    /// Energy column order of eigen.csv.
    columns: [&'static str; 4],
    /// Closed-form anti-crossing field, −ε↓/γ_e.
    lac_gauss: f64,
    /// True crossing (no coupling) rather than an anti-crossing.
    lac_true_crossing: bool,
    /// Minimum gap E₊ − E₋ on the sweep grid.
    min_gap: FieldValue,
    max_pmix: FieldValue,
    /// Largest |4α²β²(numeric) − 4a²/(Δ² + 4a²)| over the sweep.
    max_pmix_numeric_deviation: f64,
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let params = &cfg.spin_core;
    let fields = cfg.cli.sweep.points();
    let rows: Vec<(Vec<f64>, f64)> = fields
        .par_iter()
        .map(|&b| {
            let h = build_excited_hamiltonian(params, FieldConfig::gauss(b));
            let es = eigenstructure(&h);
            let (d, a) = (h.detuning(), h.coupling());
            let lorentz = if a == 0.0 { 0.0 } else { 4.0 * a * a / (d * d + 4.0 * a * a) };
            let dev = (numeric_eigenstructure(&h).mixing() - lorentz).abs();
            let e = es.energies;
            (vec![b, e[0], e[1], e[2], e[3], es.alpha, es.beta, es.mixing()], dev)
        })
        .collect();

    let lac = lac_position(params).map_err(CliError::config)?;
    let mut min_gap = FieldValue { b_gauss: f64::NAN, value: f64::INFINITY };
    let mut max_pmix = FieldValue { b_gauss: f64::NAN, value: f64::NEG_INFINITY };
    let mut max_dev: f64 = 0.0;
    for (row, dev) in &rows {
        let gap = row[3] - row[4];
        if gap < min_gap.value {
            min_gap = FieldValue { b_gauss: row[0], value: gap };
        }
        if row[7] > max_pmix.value {
            max_pmix = FieldValue { b_gauss: row[0], value: row[7] };
        }
        max_dev = max_dev.max(*dev);
    }

    let table: Vec<Vec<f64>> = rows.into_iter().map(|(r, _)| r).collect();
    out.write_table("eigen.csv", &HEADER, &table)?;
    out.write_json(
        "eigen.json",
        &EigenReport {
            rows: table.len(),
            convention: params.convention,
            columns: ["E(|0,down>)", "E(|+1,up>)", "E(|+>)", "E(|->)"],
            lac_gauss: lac.field_gauss,
            lac_true_crossing: lac.true_crossing,
            min_gap,
            max_pmix,
            max_pmix_numeric_deviation: max_dev,
        },
    )?;
    if cfg.cli.gnuplot {
        out.write_text("eigen.gp", GNUPLOT)?;
    }
    Ok(Outcome { notes: vec![format!("anti-crossing at {:.3} G", lac.field_gauss)], failures: Vec::new() })
}

const GNUPLOT: &str = r#"set datafile separator ","
set key autotitle columnhead
set xlabel "B (G)"
set ylabel "E (MHz)"
set y2label "4 alpha^2 beta^2"
set y2tics
plot "eigen.csv" using 1:2 with lines, "" using 1:3 with lines, \
     "" using 1:4 with lines, "" using 1:5 with lines, \
     "" using 1:8 axes x1y2 with lines
pause mouse close
"#;
