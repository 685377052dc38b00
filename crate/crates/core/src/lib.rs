//! Simulation and analysis of optically pumped nuclear-spin polarization in
//! NV centers near the excited-state level anti-crossing (LAC).
//!
//! Energies are frequencies in MHz (h = 1), fields are in Gauss and time in
//! the rate model is measured in units of 1/Γ, the nuclear-spin conserving
//! intersystem-crossing rate.
//!
//! Module map:
//! * [`params`] physical constants of one NV + nuclear-spin system.
//! * [`hamiltonian`] reduced excited-state Hamiltonian, its eigenstructure
//!   and ground-state ESR line positions.
//! * [`pumping`] flip probabilities, rate equations, steady state, ODE and
//!   Monte Carlo evolution, effective nuclear-spin temperature.
//! * [`spectra`] ODMR synthesis and Lorentzian fitting, polarization
//!   extraction, selective Rabi nutation traces.
//! * [`register`] two nuclear spins (¹⁵N + first-shell ¹³C).
//! * [`kratio`] single-parameter fit of the depolarization ratio.
//! * [`lm`] the Levenberg-Marquardt solver shared by the fits.

// `!(x > 0.0)` is used on purpose: it rejects NaN together with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod hamiltonian;
pub mod io;
pub mod kratio;
pub mod lm;
pub mod params;
pub mod pumping;
pub mod register;
pub mod spectra;

pub use hamiltonian::{
    build_excited_hamiltonian, eigenstructure, ground_esr_frequencies, lac_position, numeric_eigenstructure,
    EigenStructure, EsrLines, ExcitedHamiltonian, LacPosition, Manifold,
};
pub use kratio::{fit_k_ratio, FitResult, KRatioFitOptions, PolarizationPoint};
pub use params::{FieldConfig, HyperfineConvention, ParamError, SpinSystemParams};
pub use pumping::{
    effective_temperature, evolve_polarization, flip_probabilities, monte_carlo_polarization,
    steady_state_polarization, FlipProbabilities, McOptions, McResult, PolarizationState, PumpingError,
};
pub use register::{
    joint_polarization, polarization_summary, two_spin_line_positions, two_spin_steady_state, JointPolarization,
    NuclearState, RegisterError, SpinConfig, TwoSpinLine, TwoSpinParams, TwoSpinPopulations,
};
pub use spectra::{
    extract_polarization, fit_rabi, fit_spectrum, synthesize_rabi, synthesize_spectrum, FitOptions, FittedSpectrum,
    InitStrategy, LorentzianLine, Polarity, PolarizationEstimate, RabiFit, RabiLine, RabiTrace, SpectraError, Spectrum,
    SynthesisOptions,
};
