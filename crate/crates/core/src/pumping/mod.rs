//! Optical pumping of the nuclear spin through the excited-state LAC.
//!
//! Per excitation cycle the nuclear spin flips ↑→↓ with probability
//! p₊(B) = 2α²β² and ↓→↑ with p₋(B) = p₊(−B). With the rates
//!
//! ```text
//! k₊  =  (1 − P)·p₊·Γ/2
//! k₋  = −(1 + P)·p₋·Γ/2
//! k_eq = −k_eq⁰·P
//! ```
//!
//! the polarization obeys dP/dt = k₊ + k₋ + k_eq. Time is measured in units
//! of 1/Γ throughout, so only the ratio k_eq⁰/Γ enters.

mod monte_carlo;
mod ode;

pub use monte_carlo::{monte_carlo_polarization, McOptions, McResult};
pub use ode::{evolve_polarization, OdeSample, DEFAULT_DT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{build_excited_hamiltonian, eigenstructure};
use crate::params::{FieldConfig, SpinSystemParams, GAMMA_N15_KHZ_PER_G};

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PumpingError {
    #[error("steady state undefined: k_ratio = 0 and no state mixing at B = {b} G")]
    Degenerate { b: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step dt = {dt} overshoots |P| > 1 at t = {t}")]
    StepRejected { dt: f64, t: f64 },
    #[error("|P| = {0} >= 1 corresponds to zero temperature")]
    FullPolarization(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipProbabilities {
    pub p_plus: f64,
    pub p_minus: f64,
    /// Precession frequency Ω = ½·sqrt(Δ² + 4a²), MHz.
    pub omega: f64,
    /// Ω ≥ 1/(2π·τ_es): precession at least as fast as excited-state decay,
    /// the regime where averaging p_max/2 over the precession is valid.
    pub fast_precession: bool,
}

/// p₊ = p_max/2 = 2α²β² at field `b`, from the closed-form eigenstructure.
fn p_flip(params: &SpinSystemParams, field: FieldConfig) -> f64 {
    0.5 * eigenstructure(&build_excited_hamiltonian(params, field)).mixing()
}

pub fn flip_probabilities(params: &SpinSystemParams, field: FieldConfig) -> FlipProbabilities {
    let delta = params.zeeman(field) + params.eps_down();
    let omega = 0.5 * delta.hypot(2.0 * params.coupling());
    // τ in ns, so the decay rate 1/(2π τ) in MHz carries a factor 1e3.
    let decay_mhz = 1e3 / (2.0 * std::f64::consts::PI * params.tau_es);
    FlipProbabilities {
        p_plus: p_flip(params, field),
        p_minus: p_flip(params, field.reversed()),
        omega,
        fast_precession: omega >= decay_mhz,
    }
}

/// Nuclear polarization P = c² − d² with c² = ρ(↓), d² = ρ(↑).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationState {
    pub p: f64,
    /// (c², d²): populations of |0,↓⟩ and |0,↑⟩.
    pub populations: (f64, f64),
}

impl PolarizationState {
    pub fn from_polarization(p: f64) -> Self {
        Self { p, populations: ((1.0 + p) / 2.0, (1.0 - p) / 2.0) }
    }
}

/// Closed-form steady state P = (p₊ − p₋)/(2k + p₊ + p₋), k = k_eq⁰/Γ.
pub(crate) fn steady_state_from(flips: &FlipProbabilities, k_ratio: f64) -> Option<f64> {
    let denom = 2.0 * k_ratio + flips.p_plus + flips.p_minus;
    (denom > 0.0).then(|| (flips.p_plus - flips.p_minus) / denom)
}

pub fn steady_state_polarization(
    params: &SpinSystemParams,
    field: FieldConfig,
) -> Result<PolarizationState, PumpingError> {
    if !(params.k_ratio >= 0.0) {
        return Err(PumpingError::InvalidArgument(format!("k_ratio = {}", params.k_ratio)));
    }
    let flips = flip_probabilities(params, field);
    steady_state_from(&flips, params.k_ratio)
        .map(PolarizationState::from_polarization)
        .ok_or(PumpingError::Degenerate { b: field.b })
}

/// Nuclear Zeeman splitting of ¹⁵N at field `b`, kHz.
pub fn nuclear_zeeman_khz(field: FieldConfig) -> f64 {
    GAMMA_N15_KHZ_PER_G * field.b.abs()
}

/// Spin temperature of a two-level Boltzmann distribution with polarization
/// `p` across a splitting `nu_n_khz`: T = h·ν / (2·k_B·atanh|p|), in Kelvin.
///
/// `p = 0` returns `f64::INFINITY`.
pub fn effective_temperature(p: f64, nu_n_khz: f64) -> Result<f64, PumpingError> {
    if !(nu_n_khz > 0.0 && nu_n_khz.is_finite()) {
        return Err(PumpingError::InvalidArgument(format!("nu_n = {nu_n_khz} kHz")));
    }
    if p.is_nan() {
        return Err(PumpingError::InvalidArgument("p is NaN".into()));
    }
    let p = p.abs();
    if p >= 1.0 {
        return Err(PumpingError::FullPolarization(p));
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(PLANCK * nu_n_khz * 1e3 / (2.0 * BOLTZMANN * p.atanh()))
}
