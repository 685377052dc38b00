//! Selective Rabi nutation on one hyperfine line.
//!
//! Driving the ESR line of nuclear state m only rotates the population in
//! that state, so the nutation contrast scales with its occupation:
//! S(t) = 1 − C·ρ·(1 − cos 2π f_R t)/2 with ρ = (1 ± P)/2.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SpectraError;
use crate::lm::{minimize, LeastSquares, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RabiLine {
    /// ν↑, nuclear spin up
    Up,
    /// ν↓, nuclear spin down
    Down,
}

impl RabiLine {
    /// Occupation of the addressed nuclear state at polarization `p`.
    pub fn occupation(self, p: f64) -> f64 {
        match self {
            RabiLine::Up => 0.5 * (1.0 - p),
            RabiLine::Down => 0.5 * (1.0 + p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiTrace {
    pub line: RabiLine,
    /// Microwave frequency of the addressed ESR line, MHz.
    pub mw_frequency: f64,
    /// Pulse durations, μs.
    pub times: Vec<f64>,
    pub signal: Vec<f64>,
    /// MHz
    pub rabi_frequency: f64,
    pub contrast: f64,
}

impl RabiTrace {
    /// Adds Gaussian noise of standard deviation `sigma` to the signal.
    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Result<Self, SpectraError> {
        let dist = Normal::new(0.0, sigma).map_err(|e| SpectraError::InvalidInput(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in &mut self.signal {
            *s += dist.sample(&mut rng);
        }
        Ok(self)
    }
}

pub fn synthesize_rabi(
    polarization: f64,
    line: RabiLine,
    mw_frequency: f64,
    rabi_frequency: f64,
    esr_contrast: f64,
    times: &[f64],
) -> Result<RabiTrace, SpectraError> {
    if !(polarization.abs() <= 1.0) {
        return Err(SpectraError::InvalidInput(format!("polarization {polarization}")));
    }
    if !(esr_contrast > 0.0 && esr_contrast <= 1.0) {
        return Err(SpectraError::InvalidInput(format!("esr_contrast {esr_contrast}")));
    }
    if !(rabi_frequency > 0.0 && rabi_frequency.is_finite()) {
        return Err(SpectraError::InvalidInput(format!("rabi_frequency {rabi_frequency}")));
    }
    let contrast = esr_contrast * line.occupation(polarization);
    let signal = times.iter().map(|&t| nutation(1.0, contrast, rabi_frequency, t)).collect();
    Ok(RabiTrace { line, mw_frequency, times: times.to_vec(), signal, rabi_frequency, contrast })
}

fn nutation(offset: f64, contrast: f64, freq: f64, t: f64) -> f64 {
    offset - contrast * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * freq * t).cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    /// `None` when the trace shows no significant oscillation.
    pub rabi_frequency: Option<f64>,
    pub contrast: f64,
    pub offset: f64,
    pub residual_norm: f64,
    pub converged: bool,
}

struct CosineModel<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl LeastSquares for CosineModel<'_> {
    fn n_params(&self) -> usize {
        3
    }

    fn n_residuals(&self) -> usize {
        self.t.len()
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        for ((o, &t), &y) in out.iter_mut().zip(self.t).zip(self.y) {
            *o = nutation(x[0], x[1], x[2], t) - y;
        }
    }

    fn jacobian(&self, x: &[f64], jac: &mut nalgebra::DMatrix<f64>) {
        use std::f64::consts::PI;
        for (i, &t) in self.t.iter().enumerate() {
            let ph = 2.0 * PI * x[2] * t;
            jac[(i, 0)] = 1.0;
            jac[(i, 1)] = -0.5 * (1.0 - ph.cos());
            jac[(i, 2)] = -0.5 * x[1] * 2.0 * PI * t * ph.sin();
        }
    }

    fn project(&self, x: &mut [f64]) {
        x[1] = x[1].clamp(0.0, 1.0);
        x[2] = x[2].max(0.0);
    }
}

/// Least-squares fit of S(t) = o − C·(1 − cos 2πft)/2. The frequency is
/// seeded from the peak of a periodogram over the sampled times.
pub fn fit_rabi(trace: &RabiTrace) -> Result<RabiFit, SpectraError> {
    let (t, y) = (&trace.times, &trace.signal);
    if t.len() != y.len() || t.len() < 4 {
        return Err(SpectraError::InvalidInput("need >= 4 samples with matching lengths".into()));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) || y.iter().any(|v| !v.is_finite()) {
        return Err(SpectraError::InvalidInput("times must increase and signal be finite".into()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let spread = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * mean.abs().max(1.0) {
        return Ok(RabiFit { rabi_frequency: None, contrast: 0.0, offset: mean, residual_norm: 0.0, converged: true });
    }

    let span = t[t.len() - 1] - t[0];
    let min_dt = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let f_max = 0.5 / min_dt;
    let df = 0.25 / span;
    let mut best = (0.0, df);
    let mut f = df;
    while f <= f_max {
        let (mut re, mut im) = (0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let ph = 2.0 * std::f64::consts::PI * f * ti;
            re += (yi - mean) * ph.cos();
            im += (yi - mean) * ph.sin();
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, f);
        }
        f += df;
    }
    let f0 = best.1;
    let cos_amp: f64 = 2.0 / n
        * t.iter().zip(y).map(|(&ti, &yi)| (yi - mean) * (2.0 * std::f64::consts::PI * f0 * ti).cos()).sum::<f64>();
    let c0 = (2.0 * cos_amp).clamp(1e-6, 1.0);
    let x0 = [mean + 0.5 * c0, c0, f0];

    let model = CosineModel { t, y };
    let rep = minimize(&model, &x0, &LmOptions { max_iter: 300, ..Default::default() });
    if !rep.converged {
        return Err(SpectraError::InvalidInput(format!(
            "cosine fit did not converge (residual norm {})",
            rep.residual_norm
        )));
    }
    let (offset, contrast, freq) = (rep.x[0], rep.x[1], rep.x[2]);
    let se_c = rep.std_errors().map(|s| s[1]).unwrap_or(f64::INFINITY);
    let significant = contrast > 0.0 && (rep.residual_norm == 0.0 || contrast > 3.0 * se_c);
    Ok(RabiFit {
        rabi_frequency: significant.then_some(freq),
        contrast,
        offset,
        residual_norm: rep.residual_norm,
        converged: rep.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(n: usize, t_max: f64) -> Vec<f64> {
        (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn contrast_follows_occupation() {
        let t = times(50, 2.0);
        let up = synthesize_rabi(0.0, RabiLine::Up, 1.0, 2.5, 0.3, &t).unwrap();
        let down = synthesize_rabi(0.0, RabiLine::Down, 1.0, 2.5, 0.3, &t).unwrap();
        assert_eq!(up.contrast, down.contrast);
        let up1 = synthesize_rabi(1.0, RabiLine::Up, 1.0, 2.5, 0.3, &t).unwrap();
        let down1 = synthesize_rabi(1.0, RabiLine::Down, 1.0, 2.5, 0.3, &t).unwrap();
        assert!(up1.signal.iter().all(|&s| s == 1.0));
        assert_eq!(down1.contrast, 2.0 * down.contrast);
    }

    #[test]
    fn noiseless_recovery() {
        let t = times(200, 2.0);
        let tr = synthesize_rabi(0.5, RabiLine::Down, 2870.0, 3.3, 0.3, &t).unwrap();
        let fit = fit_rabi(&tr).unwrap();
        assert!((fit.rabi_frequency.unwrap() / 3.3 - 1.0).abs() < 1e-6);
        assert!((fit.contrast / tr.contrast - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_trace_is_indeterminate() {
        let t = times(100, 2.0);
        let tr = synthesize_rabi(1.0, RabiLine::Up, 2870.0, 3.3, 0.3, &t).unwrap();
        let fit = fit_rabi(&tr).unwrap();
        assert_eq!(fit.contrast, 0.0);
        assert!(fit.rabi_frequency.is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = times(10, 1.0);
        assert!(synthesize_rabi(0.0, RabiLine::Up, 1.0, 1.0, 0.0, &t).is_err());
        assert!(synthesize_rabi(0.0, RabiLine::Up, 1.0, -1.0, 0.3, &t).is_err());
        assert!(synthesize_rabi(1.5, RabiLine::Up, 1.0, 1.0, 0.3, &t).is_err());
    }
}
