//! Run configuration: one JSON document with a section per model part.
//!
//! Every field has a default, so `{}` (or an empty file) runs with the
//! standard parameter set. Unknown keys are rejected to catch typos.

use std::path::{Path, PathBuf};

use lacpump::spectra::Polarity;
use lacpump::{Manifold, SpinSystemParams, TwoSpinParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub spin_core: SpinSystemParams,
    pub pumping: PumpingConfig,
    pub spectra: SpectraConfig,
    pub register: RegisterConfig,
    pub cli: CliConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpingConfig {
    /// Add an ODE long-time column to the polarization table.
    pub ode: bool,
    /// ODE horizon, units of 1/Γ.
    pub t_end: f64,
    pub dt: f64,
    pub mc: McConfig,
    pub fit: KRatioConfig,
}

impl Default for PumpingConfig {
    fn default() -> Self {
        Self { ode: false, t_end: 100.0, dt: 0.01, mc: McConfig::default(), fit: KRatioConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_spins: u64,
    pub n_cycles: usize,
    pub p0: f64,
    /// Keep every n-th cycle in the trajectory file.
    pub trajectory_stride: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_spins: 100_000, n_cycles: 2000, p0: 0.0, trajectory_stride: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KRatioConfig {
    /// CSV `b_gauss,p,sigma`; `--data` takes precedence.
    pub data: Option<PathBuf>,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for KRatioConfig {
    fn default() -> Self {
        Self { data: None, max_iter: 200, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraConfig {
    /// Fields (G) at which single-spin spectra are synthesized.
    pub fields: Vec<f64>,
    pub manifold: Manifold,
    /// FWHM of every line, MHz.
    pub width: f64,
    /// Summed dip area of all lines, MHz.
    pub total_area: f64,
    pub baseline: f64,
    /// Noise standard deviation as a fraction of the baseline.
    pub noise: f64,
    pub grid_step: f64,
    /// Half width of the frequency window around each line, MHz.
    pub half_span: f64,
    pub polarity: Polarity,
    /// Polarization scenario overriding the pumping model.
    pub polarization: Option<f64>,
    pub fit: bool,
    pub shared_width: bool,
    pub max_iter: usize,
    pub tolerance: f64,
    pub rabi: RabiConfig,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        Self {
            fields: vec![40.0, 500.0],
            manifold: Manifold::Minus,
            width: 1.0,
            total_area: 0.5,
            baseline: 1.0,
            noise: 0.01,
            grid_step: 0.002,
            half_span: 10.0,
            polarity: Polarity::Dip,
            polarization: None,
            fit: true,
            shared_width: true,
            max_iter: 400,
            tolerance: 1e-10,
            rabi: RabiConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiConfig {
    /// Field (G) setting the polarization through the pumping model.
    pub field: f64,
    /// Polarization scenario overriding the pumping model.
    pub polarization: Option<f64>,
    /// MHz
    pub rabi_frequency: f64,
    pub esr_contrast: f64,
    pub periods: f64,
    pub samples_per_period: usize,
    /// Absolute noise on the normalized signal.
    pub noise: f64,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            field: 500.0,
            polarization: None,
            rabi_frequency: 2.5,
            esr_contrast: 0.3,
            periods: 5.0,
            samples_per_period: 50,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegisterConfig {
    /// Also synthesize four-line (¹⁵N + ¹³C) spectra.
    pub enabled: bool,
    pub a_gs_c13: f64,
    pub a_es_c13: Option<f64>,
    pub fields: Vec<f64>,
    /// Explicit ρ[m_N][m_C] (0 = down, 1 = up) replacing the pumping model.
    pub populations: Option<[[f64; 2]; 2]>,
    /// Noise fraction for the four-line spectra; defaults to `spectra.noise`.
    pub noise: Option<f64>,
}

impl Default for RegisterConfig {
    fn default() -> Self {
        Self { enabled: false, a_gs_c13: 130.0, a_es_c13: None, fields: vec![60.0], populations: None, noise: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub b_min: f64,
    pub b_max: f64,
    pub b_step: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Self { b_min: 0.0, b_max: 1000.0, b_step: 1.0 }
    }
}

/// Upper bound on sweep length, to catch unit slips like a 1e-6 G step.
pub const MAX_SWEEP_POINTS: usize = 10_000_000;

impl Sweep {
    pub fn validate(&self) -> Result<()> {
        if !(self.b_min.is_finite() && self.b_max.is_finite() && self.b_step.is_finite()) {
            return Err(CliError::config("sweep bounds must be finite"));
        }
        if !(self.b_step > 0.0) {
            return Err(CliError::config(format!("sweep step must be > 0, got {}", self.b_step)));
        }
        if self.b_min > self.b_max {
            return Err(CliError::config(format!("sweep b_min {} > b_max {}", self.b_min, self.b_max)));
        }
        if (self.b_max - self.b_min) / self.b_step >= MAX_SWEEP_POINTS as f64 {
            return Err(CliError::config("sweep has more than 10^7 points"));
        }
        Ok(())
    }

    /// b_min, b_min + step, ... up to b_max (inclusive within 1e-9 steps).
    /// Points are computed by index, not accumulated.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.b_max - self.b_min) / self.b_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.b_min + self.b_step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub sweep: Sweep,
    pub seed: u64,
    pub out: PathBuf,
    /// Also write a gnuplot script next to the data.
    pub gnuplot: bool,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self { sweep: Sweep::default(), seed: 0, out: PathBuf::from("out"), gnuplot: false }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub b_min: Option<f64>,
    pub b_max: Option<f64>,
    pub b_step: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(text).map_err(CliError::config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        let sweep = &mut self.cli.sweep;
        sweep.b_min = o.b_min.unwrap_or(sweep.b_min);
        sweep.b_max = o.b_max.unwrap_or(sweep.b_max);
        sweep.b_step = o.b_step.unwrap_or(sweep.b_step);
        self.cli.seed = o.seed.unwrap_or(self.cli.seed);
        if let Some(out) = &o.out {
            self.cli.out = out.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spin_core.validate().map_err(CliError::config)?;
        self.cli.sweep.validate()?;
        let p = &self.pumping;
        if !(p.t_end > 0.0 && p.dt > 0.0 && p.t_end.is_finite() && p.dt.is_finite()) {
            return Err(CliError::config(format!("pumping: t_end {} and dt {} must be > 0", p.t_end, p.dt)));
        }
        if p.mc.n_spins == 0 || p.mc.n_cycles == 0 || p.mc.trajectory_stride == 0 {
            return Err(CliError::config("pumping.mc: n_spins, n_cycles and trajectory_stride must be >= 1"));
        }
        if !(p.mc.p0.abs() <= 1.0) {
            return Err(CliError::config(format!("pumping.mc.p0 = {} outside [-1, 1]", p.mc.p0)));
        }
        let s = &self.spectra;
        for (name, v) in [
            ("width", s.width),
            ("total_area", s.total_area),
            ("baseline", s.baseline),
            ("grid_step", s.grid_step),
            ("half_span", s.half_span),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::config(format!("spectra.{name} must be > 0, got {v}")));
            }
        }
        if !(s.noise >= 0.0 && s.noise.is_finite()) {
            return Err(CliError::config(format!("spectra.noise must be >= 0, got {}", s.noise)));
        }
        if s.half_span / s.grid_step > 1e7 {
            return Err(CliError::config("spectra: more than 10^7 grid points per window"));
        }
        for (name, v) in [("spectra.polarization", s.polarization), ("spectra.rabi.polarization", s.rabi.polarization)]
        {
            if let Some(v) = v {
                if !(v.abs() <= 1.0) {
                    return Err(CliError::config(format!("{name} = {v} outside [-1, 1]")));
                }
            }
        }
        let r = &s.rabi;
        if !(r.periods > 0.0 && r.samples_per_period >= 4) {
            return Err(CliError::config("spectra.rabi: need periods > 0 and samples_per_period >= 4"));
        }
        if !(r.noise >= 0.0 && r.noise.is_finite()) {
            return Err(CliError::config(format!("spectra.rabi.noise must be >= 0, got {}", r.noise)));
        }
        let g = &self.register;
        if !(g.a_gs_c13 > 0.0 && g.a_gs_c13.is_finite()) {
            return Err(CliError::config(format!("register.a_gs_c13 must be > 0, got {}", g.a_gs_c13)));
        }
        if g.enabled && g.populations.is_none() && g.a_es_c13.is_none() {
            return Err(CliError::config(
                "register: a_es_c13 is required to pump the ¹³C spin (or give explicit populations)",
            ));
        }
        if let Some(n) = g.noise {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(CliError::config(format!("register.noise must be >= 0, got {n}")));
            }
        }
        Ok(())
    }

    pub fn two_spin_params(&self) -> TwoSpinParams {
        TwoSpinParams { base: self.spin_core, a_gs_c13: self.register.a_gs_c13, a_es_c13: self.register.a_es_c13 }
    }
}
