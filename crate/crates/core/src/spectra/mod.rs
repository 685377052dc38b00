//! ODMR spectra: Lorentzian synthesis and fitting, polarization extraction
//! from line areas, and selective Rabi nutation traces.
//!
//! A line is parameterized by center, FWHM and area. In a dip spectrum
//!
//! ```text
//! I(ν) = I₀ · (1 − Σᵢ areaᵢ · Lᵢ(ν)),   Lᵢ(ν) = (wᵢ/2)/π / ((ν − cᵢ)² + wᵢ²/4)
//! ```
//!
//! so `area` is the integral of the baseline-relative dip, the quantity that
//! enters the polarization ratio.

mod fit;
mod polarization;
mod rabi;
mod synth;

pub use fit::{assign_labels, fit_spectrum, FitOptions, FittedSpectrum, InitStrategy, LineUncertainty};
pub use polarization::{extract_polarization, polarization_from_areas, PolarizationEstimate, UncertaintyMethod};
pub use rabi::{fit_rabi, synthesize_rabi, RabiFit, RabiLine, RabiTrace};
pub use synth::{synthesize_spectrum, uniform_grid, window_grid, SynthesisOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("found {found} dip(s), {requested} requested")]
    Initialization { found: usize, requested: usize },
    #[error("fit did not converge after {} iterations (residual norm {})", .best.iterations, .best.residual_norm)]
    NotConverged { best: Box<FittedSpectrum> },
    #[error("no fitted line labeled `{0}`")]
    MissingLabel(String),
    #[error("polarization undefined: both line areas are zero")]
    UndefinedPolarization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianLine {
    /// MHz
    pub center: f64,
    /// Full width at half maximum, MHz.
    pub width: f64,
    /// Integrated baseline-relative dip area, MHz.
    pub area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl LorentzianLine {
    pub fn new(center: f64, width: f64, area: f64) -> Self {
        Self { center, width, area, label: None }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Unit-area Lorentzian profile at `nu`.
    pub fn profile(&self, nu: f64) -> f64 {
        profile(nu, self.center, self.width)
    }

    /// Baseline-relative depth at `nu`: area × profile.
    pub fn depth(&self, nu: f64) -> f64 {
        self.area * self.profile(nu)
    }

    /// Baseline-relative depth at the line center, 2·area/(π·width).
    pub fn peak_depth(&self) -> f64 {
        2.0 * self.area / (std::f64::consts::PI * self.width)
    }

    fn check(&self) -> Result<(), SpectraError> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(SpectraError::InvalidInput(format!("line width {}", self.width)));
        }
        if !(self.area >= 0.0 && self.area.is_finite()) {
            return Err(SpectraError::InvalidInput(format!("line area {}", self.area)));
        }
        if !self.center.is_finite() {
            return Err(SpectraError::InvalidInput("line center not finite".into()));
        }
        Ok(())
    }
}

pub(crate) fn profile(nu: f64, center: f64, width: f64) -> f64 {
    let g = 0.5 * width;
    let u = nu - center;
    g / (std::f64::consts::PI * (u * u + g * g))
}

/// Resonances reduce photoluminescence (`Dip`); `Peak` flips the sign for
/// absorption-style data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    #[default]
    Dip,
    Peak,
}

impl Polarity {
    pub(crate) fn sign(self) -> f64 {
        match self {
            Polarity::Dip => -1.0,
            Polarity::Peak => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Strictly increasing grid, MHz.
    pub frequencies: Vec<f64>,
    pub intensities: Vec<f64>,
    #[serde(default)]
    pub lines: Vec<LorentzianLine>,
    #[serde(default)]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub polarity: Polarity,
    /// Set when synthesis had to clip negative intensities.
    #[serde(default)]
    pub clipped: bool,
}

impl Spectrum {
    /// Measured data without attached lines.
    pub fn from_data(frequencies: Vec<f64>, intensities: Vec<f64>) -> Result<Self, SpectraError> {
        let s = Self {
            frequencies,
            intensities,
            lines: Vec::new(),
            noise_sigma: None,
            polarity: Polarity::Dip,
            clipped: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SpectraError> {
        if self.frequencies.len() != self.intensities.len() {
            return Err(SpectraError::InvalidInput(format!(
                "{} frequencies vs {} intensities",
                self.frequencies.len(),
                self.intensities.len()
            )));
        }
        check_grid(&self.frequencies)?;
        if self.intensities.iter().any(|v| !v.is_finite()) {
            return Err(SpectraError::InvalidInput("non-finite intensity".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn line(&self, label: &str) -> Option<&LorentzianLine> {
        self.lines.iter().find(|l| l.label.as_deref() == Some(label))
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<(), SpectraError> {
    if grid.is_empty() {
        return Err(SpectraError::InvalidInput("empty frequency grid".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(SpectraError::InvalidInput("non-finite grid value".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SpectraError::InvalidInput("grid is not strictly increasing".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_depth_matches_profile() {
        let l = LorentzianLine::new(10.0, 2.0, 0.3);
        assert!((l.depth(10.0) - l.peak_depth()).abs() < 1e-15);
        assert!((l.depth(11.0) - 0.5 * l.peak_depth()).abs() < 1e-15);
    }

    #[test]
    fn grid_checks() {
        assert!(check_grid(&[1.0, 2.0, 3.0]).is_ok());
        assert!(check_grid(&[1.0, 1.0]).is_err());
        assert!(check_grid(&[]).is_err());
        assert!(Spectrum::from_data(vec![1.0, 2.0], vec![1.0]).is_err());
    }
}
