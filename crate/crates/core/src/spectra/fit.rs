//! Multi-Lorentzian least-squares fit of ODMR spectra.
//!
//! Parameters are the baseline plus (center, ln width, area) per line, or a
//! single ln width shared by all lines when `shared_width` is set. Widths are
//! fitted in log space so they stay positive; areas are projected onto
//! `area ≥ 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{LorentzianLine, SpectraError, Spectrum};
use crate::lm::{minimize, LeastSquares, LmOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Seed from dips detected in the smoothed data.
    #[default]
    Auto,
    /// Use the given lines as starting values; their labels are kept.
    Guesses(Vec<LorentzianLine>),
    /// Detect dips; fall back to the guesses when too few are found.
    AutoOr(Vec<LorentzianLine>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub lm: LmOptions,
    /// One width for all lines (same power broadening).
    pub shared_width: bool,
    /// Detection threshold in units of the smoothed noise level.
    pub detect_sigmas: f64,
    /// Seed for bootstrap replicas of the polarization uncertainty.
    pub bootstrap_seed: u64,
    pub bootstrap_replicas: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lm: LmOptions { max_iter: 400, ..Default::default() },
            shared_width: false,
            detect_sigmas: 6.0,
            bootstrap_seed: 0,
            bootstrap_replicas: 200,
        }
    }
}

/// One-sigma errors of a fitted line. NaN (null in JSON) marks a parameter
/// the data do not constrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineUncertainty {
    pub center: f64,
    pub width: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSpectrum {
    /// Input data with `lines` replaced by the fitted lines, sorted by center.
    pub spectrum: Spectrum,
    pub baseline: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// One-sigma errors per fitted line; `None` when the covariance is
    /// unavailable.
    pub uncertainties: Option<Vec<LineUncertainty>>,
    /// Covariance of `[baseline, (center, width, area) per line]`.
    #[serde(skip)]
    pub covariance: Option<DMatrix<f64>>,
    pub options: FitOptions,
}

impl FittedSpectrum {
    pub fn lines(&self) -> &[LorentzianLine] {
        &self.spectrum.lines
    }

    /// Index of the line labeled `label` in [`Self::lines`].
    pub fn line_index(&self, label: &str) -> Option<usize> {
        self.spectrum.lines.iter().position(|l| l.label.as_deref() == Some(label))
    }

    pub fn model(&self, nu: f64) -> f64 {
        let depth: f64 = self.spectrum.lines.iter().map(|l| l.depth(nu)).sum();
        self.baseline * (1.0 + self.spectrum.polarity.sign() * depth)
    }
}

pub(crate) struct SpectrumModel<'a> {
    pub freqs: &'a [f64],
    pub y: &'a [f64],
    pub n_lines: usize,
    pub shared_width: bool,
    pub sign: f64,
}

impl SpectrumModel<'_> {
    fn n_params(&self) -> usize {
        if self.shared_width {
            2 + 2 * self.n_lines
        } else {
            1 + 3 * self.n_lines
        }
    }

    /// (center, ln width, area) parameter indices of line `i`.
    fn idx(&self, i: usize) -> (usize, usize, usize) {
        if self.shared_width {
            (2 + 2 * i, 1, 3 + 2 * i)
        } else {
            (1 + 3 * i, 2 + 3 * i, 3 + 3 * i)
        }
    }

    pub fn pack(&self, baseline: f64, lines: &[LorentzianLine]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_params()];
        x[0] = baseline;
        for (i, l) in lines.iter().enumerate() {
            let (c, w, a) = self.idx(i);
            x[c] = l.center;
            x[w] = l.width.ln();
            x[a] = l.area;
        }
        if self.shared_width {
            let mean_log = lines.iter().map(|l| l.width.ln()).sum::<f64>() / lines.len() as f64;
            x[1] = mean_log;
        }
        x
    }

    pub fn unpack(&self, x: &[f64]) -> (f64, Vec<(f64, f64, f64)>) {
        let lines = (0..self.n_lines)
            .map(|i| {
                let (c, w, a) = self.idx(i);
                (x[c], x[w].exp(), x[a])
            })
            .collect();
        (x[0], lines)
    }

    pub fn evaluate(&self, x: &[f64], nu: f64) -> f64 {
        let (base, lines) = self.unpack(x);
        let depth: f64 = lines.iter().map(|&(c, w, a)| a * super::profile(nu, c, w)).sum();
        base * (1.0 + self.sign * depth)
    }
}

impl LeastSquares for SpectrumModel<'_> {
    fn n_params(&self) -> usize {
        SpectrumModel::n_params(self)
    }

    fn n_residuals(&self) -> usize {
        self.freqs.len()
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        for ((o, &nu), &y) in out.iter_mut().zip(self.freqs).zip(self.y) {
            *o = self.evaluate(x, nu) - y;
        }
    }

    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        use std::f64::consts::PI;
        let (base, lines) = self.unpack(x);
        jac.fill(0.0);
        for (r, &nu) in self.freqs.iter().enumerate() {
            let mut depth = 0.0;
            for (i, &(c, w, a)) in lines.iter().enumerate() {
                let g = 0.5 * w;
                let u = nu - c;
                let d = u * u + g * g;
                let l = g / (PI * d);
                depth += a * l;
                let dl_dc = 2.0 * g * u / (PI * d * d);
                let dl_dlnw = g * (u * u - g * g) / (PI * d * d);
                let (ic, iw, ia) = self.idx(i);
                jac[(r, ic)] = base * self.sign * a * dl_dc;
                jac[(r, iw)] += base * self.sign * a * dl_dlnw;
                jac[(r, ia)] = base * self.sign * l;
            }
            jac[(r, 0)] = 1.0 + self.sign * depth;
        }
    }

    fn project(&self, x: &mut [f64]) {
        for i in 0..self.n_lines {
            let (_, w, a) = self.idx(i);
            x[a] = x[a].max(0.0);
            x[w] = x[w].clamp(-30.0, 30.0);
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn boxcar(data: &[f64], half: usize) -> Vec<f64> {
    let n = data.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + data[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Dips ranked by descending depth, located at maxima of the smoothed
/// depth that also have positive smoothed curvature −I''.
fn detect_dips(spec: &Spectrum, baseline: f64, detect_sigmas: f64) -> Vec<LorentzianLine> {
    let n = spec.len();
    if n < 5 {
        return Vec::new();
    }
    let sign = spec.polarity.sign();
    let depth: Vec<f64> = spec.intensities.iter().map(|&v| sign * (v - baseline) / baseline).collect();

    // noise from first differences, robust to the lines
    let diffs: Vec<f64> = depth.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let sigma = 1.4826 * median(&diffs) / std::f64::consts::SQRT_2;

    let half = (n / 500).clamp(1, 50);
    let smooth = boxcar(&boxcar(&depth, half), half);
    let sigma_s = sigma / ((2 * half + 1) as f64).sqrt();
    let threshold = (detect_sigmas * sigma_s).max(1e-9);

    let mut found = Vec::new();
    let nms = 2 * half + 1;
    for i in 1..n - 1 {
        let s = smooth[i];
        if s <= threshold {
            continue;
        }
        let lo = i.saturating_sub(nms);
        let hi = (i + nms).min(n - 1);
        if (lo..=hi).any(|j| smooth[j] > s || (smooth[j] == s && j < i)) {
            continue;
        }
        // −I'' > 0 means the smoothed depth is concave here
        let (a, b) = (i.saturating_sub(half), (i + half).min(n - 1));
        if a == i || b == i {
            continue;
        }
        let (xa, xi, xb) = (spec.frequencies[a], spec.frequencies[i], spec.frequencies[b]);
        let curv = 2.0 * ((smooth[b] - s) / (xb - xi) - (s - smooth[a]) / (xi - xa)) / (xb - xa);
        if curv >= 0.0 {
            continue;
        }
        found.push((i, s));
    }
    found.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut lines: Vec<LorentzianLine> = Vec::new();
    for &(i, s) in &found {
        let width = half_depth_width(&spec.frequencies, &smooth, i, s);
        lines.push(LorentzianLine::new(spec.frequencies[i], width.unwrap_or(f64::NAN), 0.0));
    }
    let fallback = lines.iter().map(|l| l.width).find(|w| w.is_finite());
    let min_step = spec.frequencies.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    for (line, &(_, s)) in lines.iter_mut().zip(&found) {
        if !line.width.is_finite() {
            line.width = fallback.unwrap_or(20.0 * min_step);
        }
        line.width = line.width.max(2.0 * min_step);
        line.area = s * std::f64::consts::PI * line.width / 2.0;
    }
    lines
}

fn half_depth_width(freqs: &[f64], smooth: &[f64], i: usize, peak: f64) -> Option<f64> {
    let half = 0.5 * peak;
    let reach = (freqs.len() / 10).max(5);
    let left = (i.saturating_sub(reach)..i).rev().find(|&j| smooth[j] < half)?;
    let right = (i + 1..(i + reach).min(freqs.len())).find(|&j| smooth[j] < half)?;
    let lerp = |j0: usize, j1: usize| {
        let (y0, y1) = (smooth[j0], smooth[j1]);
        let t = if y1 != y0 { (half - y0) / (y1 - y0) } else { 0.5 };
        freqs[j0] + t * (freqs[j1] - freqs[j0])
    };
    Some(lerp(right - 1, right) - lerp(left + 1, left))
}

/// Fits `n_lines` Lorentzians plus a baseline. Lines come back sorted by
/// center; labels from guesses stay attached to their lines.
pub fn fit_spectrum(
    spectrum: &Spectrum,
    n_lines: usize,
    init: &InitStrategy,
    opts: &FitOptions,
) -> Result<FittedSpectrum, SpectraError> {
    spectrum.validate()?;
    if n_lines == 0 {
        return Err(SpectraError::InvalidInput("n_lines must be >= 1".into()));
    }
    let baseline0 = median(&spectrum.intensities);
    if !(baseline0 > 0.0) {
        return Err(SpectraError::InvalidInput(format!("baseline estimate {baseline0} is not positive")));
    }

    let guesses = |g: &[LorentzianLine]| -> Result<Vec<LorentzianLine>, SpectraError> {
        if g.len() != n_lines {
            return Err(SpectraError::InvalidInput(format!("{} guesses for {n_lines} lines", g.len())));
        }
        for l in g {
            l.check()?;
        }
        Ok(g.to_vec())
    };
    let start = match init {
        InitStrategy::Guesses(g) => guesses(g)?,
        InitStrategy::Auto | InitStrategy::AutoOr(_) => {
            let mut found = detect_dips(spectrum, baseline0, opts.detect_sigmas);
            match init {
                InitStrategy::AutoOr(g) if found.len() < n_lines => guesses(g)?,
                _ if found.len() < n_lines => {
                    return Err(SpectraError::Initialization { found: found.len(), requested: n_lines })
                }
                _ => {
                    found.truncate(n_lines);
                    found
                }
            }
        }
    };

    let model = SpectrumModel {
        freqs: &spectrum.frequencies,
        y: &spectrum.intensities,
        n_lines,
        shared_width: opts.shared_width,
        sign: spectrum.polarity.sign(),
    };
    let x0 = model.pack(baseline0, &start);
    let rep = minimize(&model, &x0, &opts.lm);

    let (baseline, params) = model.unpack(&rep.x);
    let mut order: Vec<usize> = (0..n_lines).collect();
    order.sort_by(|&a, &b| params[a].0.total_cmp(&params[b].0));

    let lines: Vec<LorentzianLine> = order
        .iter()
        .map(|&i| {
            let (c, w, a) = params[i];
            LorentzianLine { center: c, width: w, area: a, label: start[i].label.clone() }
        })
        .collect();

    // covariance in natural parameters, reordered to the sorted line order
    let covariance = rep.covariance.as_ref().map(|cov| {
        let dim = 1 + 3 * n_lines;
        let mut jt = DMatrix::zeros(dim, model.n_params());
        jt[(0, 0)] = 1.0;
        for (k, &i) in order.iter().enumerate() {
            let (ic, iw, ia) = model.idx(i);
            jt[(1 + 3 * k, ic)] = 1.0;
            jt[(2 + 3 * k, iw)] = params[i].1;
            jt[(3 + 3 * k, ia)] = 1.0;
        }
        &jt * cov * jt.transpose()
    });
    // NaN marks a parameter the data do not constrain (e.g. the center of a
    // line whose area sits at zero).
    let sd = |v: f64, j: usize| if rep.unconstrained[j] { f64::NAN } else { v.max(0.0).sqrt() };
    let uncertainties = covariance.as_ref().map(|c| {
        order
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let (ic, iw, ia) = model.idx(i);
                LineUncertainty {
                    center: sd(c[(1 + 3 * k, 1 + 3 * k)], ic),
                    width: sd(c[(2 + 3 * k, 2 + 3 * k)], iw),
                    area: sd(c[(3 + 3 * k, 3 + 3 * k)], ia),
                }
            })
            .collect()
    });

    let fitted = FittedSpectrum {
        spectrum: Spectrum { lines, ..spectrum.clone() },
        baseline,
        residual_norm: rep.residual_norm,
        iterations: rep.iterations,
        converged: rep.converged,
        uncertainties,
        covariance,
        options: opts.clone(),
    };
    if !rep.converged {
        return Err(SpectraError::NotConverged { best: Box::new(fitted) });
    }
    Ok(fitted)
}

/// Labels fitted lines by nearest expected center. Each expected label is
/// matched at most once, closest pairs first.
pub fn assign_labels(fitted: &mut FittedSpectrum, expected: &[(&str, f64)]) {
    let lines = &mut fitted.spectrum.lines;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (e, &(_, c)) in expected.iter().enumerate() {
        for (i, l) in lines.iter().enumerate() {
            pairs.push(((l.center - c).abs(), e, i));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used_e = vec![false; expected.len()];
    let mut used_l = vec![false; lines.len()];
    for (_, e, i) in pairs {
        if !used_e[e] && !used_l[i] {
            used_e[e] = true;
            used_l[i] = true;
            lines[i].label = Some(expected[e].0.to_string());
        }
    }
}
