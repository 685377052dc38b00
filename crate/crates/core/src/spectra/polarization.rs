use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fit::{fit_spectrum, FittedSpectrum, InitStrategy};
use super::{SpectraError, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMethod {
    Covariance,
    Bootstrap,
    /// Neither route produced an estimate (e.g. all bootstrap refits failed).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationEstimate {
    pub p: f64,
    pub sigma: f64,
    pub method: UncertaintyMethod,
}

/// P = (I↓ − I↑)/(I↓ + I↑) from the two line integrals.
pub fn polarization_from_areas(area_down: f64, area_up: f64) -> Result<f64, SpectraError> {
    if !(area_down >= 0.0 && area_up >= 0.0) {
        return Err(SpectraError::InvalidInput(format!("negative area ({area_down}, {area_up})")));
    }
    let total = area_down + area_up;
    if total == 0.0 {
        return Err(SpectraError::UndefinedPolarization);
    }
    Ok((area_down - area_up) / total)
}

/// Polarization of a fitted spectrum from the lines labeled `up_label` and
/// `down_label`.
///
/// The uncertainty is first-order propagation through the area covariance;
/// when that is unavailable the residuals are resampled and refitted
/// (`options.bootstrap_replicas`, at least 200).
pub fn extract_polarization(
    fitted: &FittedSpectrum,
    up_label: &str,
    down_label: &str,
) -> Result<PolarizationEstimate, SpectraError> {
    let iu = fitted.line_index(up_label).ok_or_else(|| SpectraError::MissingLabel(up_label.into()))?;
    let id = fitted.line_index(down_label).ok_or_else(|| SpectraError::MissingLabel(down_label.into()))?;
    let (au, ad) = (fitted.lines()[iu].area, fitted.lines()[id].area);
    let p = polarization_from_areas(ad, au)?;

    if let Some(cov) = &fitted.covariance {
        let (ku, kd) = (3 + 3 * iu, 3 + 3 * id);
        let c = Matrix2::new(cov[(kd, kd)], cov[(kd, ku)], cov[(ku, kd)], cov[(ku, ku)]);
        let s2 = (ad + au) * (ad + au);
        let g = nalgebra::Vector2::new(2.0 * au / s2, -2.0 * ad / s2);
        let var = (g.transpose() * c * g)[(0, 0)];
        if var.is_finite() && var >= 0.0 {
            return Ok(PolarizationEstimate { p, sigma: var.sqrt(), method: UncertaintyMethod::Covariance });
        }
    }
    Ok(bootstrap(fitted, iu, id, p))
}

fn bootstrap(fitted: &FittedSpectrum, iu: usize, id: usize, p: f64) -> PolarizationEstimate {
    let spec = &fitted.spectrum;
    let residuals: Vec<f64> =
        spec.frequencies.iter().zip(&spec.intensities).map(|(&nu, &y)| y - fitted.model(nu)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(fitted.options.bootstrap_seed);
    let guesses = InitStrategy::Guesses(fitted.lines().to_vec());
    let n = fitted.lines().len();
    let mut samples = Vec::new();
    for _ in 0..fitted.options.bootstrap_replicas.max(200) {
        let intensities: Vec<f64> = spec
            .frequencies
            .iter()
            .map(|&nu| fitted.model(nu) + residuals[rng.random_range(0..residuals.len())])
            .collect();
        let replica = Spectrum { intensities, lines: Vec::new(), ..spec.clone() };
        let refit = match fit_spectrum(&replica, n, &guesses, &fitted.options) {
            Ok(f) => f,
            Err(SpectraError::NotConverged { best }) => *best,
            Err(_) => continue,
        };
        // guesses carry the labels, so the indices follow the refit order
        let (au, ad) = match (refit.line_index_of(iu, fitted), refit.line_index_of(id, fitted)) {
            (Some(u), Some(d)) => (refit.lines()[u].area, refit.lines()[d].area),
            _ => continue,
        };
        if let Ok(v) = polarization_from_areas(ad, au) {
            samples.push(v);
        }
    }
    if samples.len() < 2 {
        return PolarizationEstimate { p, sigma: f64::NAN, method: UncertaintyMethod::None };
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    PolarizationEstimate { p, sigma: var.sqrt(), method: UncertaintyMethod::Bootstrap }
}

impl FittedSpectrum {
    /// Index in `self` of the line that was at `index` in `original`,
    /// matched by label or, for unlabeled lines, by nearest center.
    fn line_index_of(&self, index: usize, original: &FittedSpectrum) -> Option<usize> {
        let line = &original.lines()[index];
        match &line.label {
            Some(l) => self.line_index(l),
            None => self
                .lines()
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1.center - line.center).abs().total_cmp(&(b.1.center - line.center).abs()))
                .map(|(i, _)| i),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{synthesize_spectrum, uniform_grid, FitOptions, LorentzianLine, SynthesisOptions};

    #[test]
    fn eq1_arithmetic() {
        assert_eq!(polarization_from_areas(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(polarization_from_areas(0.3, 0.0).unwrap(), 1.0);
        assert!((polarization_from_areas(0.99, 0.01).unwrap() - 0.98).abs() < 1e-15);
        assert_eq!(polarization_from_areas(0.0, 0.0), Err(SpectraError::UndefinedPolarization));
    }

    fn fitted(noise: f64, seed: u64) -> FittedSpectrum {
        let lines = vec![
            LorentzianLine::new(1467.2, 1.0, 0.4).labeled("down"),
            LorentzianLine::new(1470.3, 1.0, 0.1).labeled("up"),
        ];
        let grid = uniform_grid(1455.0, 1482.0, 0.01);
        let s =
            synthesize_spectrum(&lines, &grid, &SynthesisOptions { noise_sigma: noise, seed, ..Default::default() })
                .unwrap();
        fit_spectrum(&s, 2, &InitStrategy::Guesses(lines), &FitOptions::default()).unwrap()
    }

    #[test]
    fn covariance_route() {
        let f = fitted(0.01, 5);
        let est = extract_polarization(&f, "up", "down").unwrap();
        assert_eq!(est.method, UncertaintyMethod::Covariance);
        assert!((est.p - 0.6).abs() < 5.0 * est.sigma);
        assert!(est.sigma > 0.0 && est.sigma < 0.05);
    }

    #[test]
    fn bootstrap_route_agrees_with_covariance() {
        let mut f = fitted(0.01, 6);
        let cov = extract_polarization(&f, "up", "down").unwrap();
        f.covariance = None;
        f.options.bootstrap_replicas = 200;
        let boot = extract_polarization(&f, "up", "down").unwrap();
        assert_eq!(boot.method, UncertaintyMethod::Bootstrap);
        assert_eq!(boot.p, cov.p);
        assert!((boot.sigma / cov.sigma - 1.0).abs() < 0.35, "{} vs {}", boot.sigma, cov.sigma);
    }

    #[test]
    fn missing_label() {
        let f = fitted(0.0, 0);
        assert_eq!(extract_polarization(&f, "x", "down"), Err(SpectraError::MissingLabel("x".into())));
    }

    #[test]
    fn scale_invariance() {
        let a = polarization_from_areas(0.7, 0.2).unwrap();
        let b = polarization_from_areas(7.0, 2.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}
