//! Physical constants of a single NV center coupled to a ¹⁵N nuclear spin.
//!
//! All energies are in MHz with h = 1, so an "energy" and a "frequency" are
//! the same number. Fields are in Gauss.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Electron gyromagnetic ratio g_e·μ_B/h for g_e ≈ 2, MHz/G.
pub const GAMMA_E_MHZ_PER_G: f64 = 2.8025;

/// Magnitude of the ¹⁵N nuclear gyromagnetic ratio, kHz/G.
pub const GAMMA_N15_KHZ_PER_G: f64 = 0.4316;

/// Order-of-magnitude intersystem-crossing rate Γ, MHz. Only used for
/// reporting; the rate model works in units of 1/Γ.
pub const GAMMA_ISC_MHZ: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("gamma_e must be positive and finite, got {0}")]
    GammaE(f64),
    #[error("tau_es must be positive and finite, got {0}")]
    Tau(f64),
    #[error("k_ratio must be non-negative and finite, got {0}")]
    KRatio(f64),
    #[error("parameter `{name}` is not finite")]
    NonFinite { name: &'static str },
}

/// Which excited-state sublevel of the m_s = +1 doublet gets +A_es/2.
///
/// The operator form A_es·S·I puts +A_es/2 on |+1,↑⟩ (m_s·m_I = +1/2). The
/// swapped assignment is kept available because the compact `D_es ± A_es/2`
/// notation does not fix the ordering; it moves the LAC from ≈517 G to
/// ≈496 G with the default constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperfineConvention {
    #[default]
    OperatorForm,
    Swapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinSystemParams {
    /// Ground-state zero-field splitting, MHz.
    pub d_gs: f64,
    /// Excited-state zero-field splitting, MHz (signed).
    pub d_es: f64,
    /// Ground-state ¹⁵N hyperfine coupling, MHz (signed).
    pub a_gs: f64,
    /// Excited-state ¹⁵N hyperfine coupling, MHz (signed).
    pub a_es: f64,
    /// Electron gyromagnetic ratio, MHz/G.
    pub gamma_e: f64,
    /// Excited-state lifetime, ns.
    pub tau_es: f64,
    /// Depolarization ratio k_eq⁰/Γ.
    pub k_ratio: f64,
    pub convention: HyperfineConvention,
}

impl Default for SpinSystemParams {
    fn default() -> Self {
        Self {
            d_gs: 2870.0,
            d_es: -1420.0,
            a_gs: -3.05,
            a_es: 60.0,
            gamma_e: GAMMA_E_MHZ_PER_G,
            tau_es: 12.0,
            k_ratio: 0.009,
            convention: HyperfineConvention::OperatorForm,
        }
    }
}

impl SpinSystemParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, v) in [("d_gs", self.d_gs), ("d_es", self.d_es), ("a_gs", self.a_gs), ("a_es", self.a_es)] {
            if !v.is_finite() {
                return Err(ParamError::NonFinite { name });
            }
        }
        if !(self.gamma_e.is_finite() && self.gamma_e > 0.0) {
            return Err(ParamError::GammaE(self.gamma_e));
        }
        if !(self.tau_es.is_finite() && self.tau_es > 0.0) {
            return Err(ParamError::Tau(self.tau_es));
        }
        if !(self.k_ratio.is_finite() && self.k_ratio >= 0.0) {
            return Err(ParamError::KRatio(self.k_ratio));
        }
        Ok(())
    }

    pub fn with_k_ratio(mut self, k_ratio: f64) -> Self {
        self.k_ratio = k_ratio;
        self
    }

    /// ε₊₁↑, the hyperfine-shifted zero-field energy of |+1,↑⟩.
    pub fn eps_up(&self) -> f64 {
        match self.convention {
            HyperfineConvention::OperatorForm => self.d_es + self.a_es / 2.0,
            HyperfineConvention::Swapped => self.d_es - self.a_es / 2.0,
        }
    }

    /// ε₊₁↓, the zero-field energy of |+1,↓⟩, the level that anti-crosses |0,↑⟩.
    pub fn eps_down(&self) -> f64 {
        match self.convention {
            HyperfineConvention::OperatorForm => self.d_es - self.a_es / 2.0,
            HyperfineConvention::Swapped => self.d_es + self.a_es / 2.0,
        }
    }

    /// Coupling a = A_es/√2 between |+1,↓⟩ and |0,↑⟩.
    pub fn coupling(&self) -> f64 {
        self.a_es / std::f64::consts::SQRT_2
    }

    /// Electron Zeeman energy b = g_e·μ_B·B in MHz.
    pub fn zeeman(&self, field: FieldConfig) -> f64 {
        self.gamma_e * field.b
    }
}

/// Magnetic field along the NV axis, Gauss. The sign is meaningful: the
/// reversed field drives the m_s = 0 ↔ −1 crossing.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct FieldConfig {
    pub b: f64,
}

impl FieldConfig {
    pub fn gauss(b: f64) -> Self {
        Self { b }
    }

    pub fn reversed(self) -> Self {
        Self { b: -self.b }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(SpinSystemParams::default().validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let p = SpinSystemParams { gamma_e: 0.0, ..Default::default() };
        assert_eq!(p.validate(), Err(ParamError::GammaE(0.0)));
        let p = SpinSystemParams { tau_es: -1.0, ..Default::default() };
        assert!(matches!(p.validate(), Err(ParamError::Tau(_))));
        let p = SpinSystemParams { k_ratio: -0.1, ..Default::default() };
        assert!(matches!(p.validate(), Err(ParamError::KRatio(_))));
        let p = SpinSystemParams { d_es: f64::NAN, ..Default::default() };
        assert!(matches!(p.validate(), Err(ParamError::NonFinite { name: "d_es" })));
    }

    #[test]
    fn hyperfine_conventions() {
        let p = SpinSystemParams::default();
        assert_eq!(p.eps_up(), -1390.0);
        assert_eq!(p.eps_down(), -1450.0);
        let s = SpinSystemParams { convention: HyperfineConvention::Swapped, ..p };
        assert_eq!(s.eps_up(), -1450.0);
        assert_eq!(s.eps_down(), -1390.0);
    }
}
