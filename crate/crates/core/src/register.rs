//! Two nuclear spins, ¹⁵N and a first-shell ¹³C, pumped at the same LAC.
//!
//! The two channels are treated as independent: each is polarized by the
//! single-spin mechanism with its own excited-state coupling and the joint
//! populations are the product of the marginals. No coupled model is
//! attempted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::Manifold;
use crate::params::{FieldConfig, SpinSystemParams};
use crate::pumping::{steady_state_polarization, PumpingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegisterError {
    #[error("a_es_c13 is required: there is no default excited-state ¹³C coupling")]
    MissingC13Coupling,
    #[error("invalid populations: {0}")]
    Populations(String),
    #[error(transparent)]
    Pumping(#[from] PumpingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoSpinParams {
    pub base: SpinSystemParams,
    /// Ground-state ¹³C hyperfine splitting, MHz.
    pub a_gs_c13: f64,
    /// Excited-state ¹³C coupling, MHz. Must be supplied.
    pub a_es_c13: Option<f64>,
}

impl Default for TwoSpinParams {
    fn default() -> Self {
        Self { base: SpinSystemParams::default(), a_gs_c13: 130.0, a_es_c13: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuclearState {
    Down,
    Up,
}

impl NuclearState {
    pub fn m(self) -> f64 {
        match self {
            NuclearState::Down => -0.5,
            NuclearState::Up => 0.5,
        }
    }

    fn index(self) -> usize {
        match self {
            NuclearState::Down => 0,
            NuclearState::Up => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            NuclearState::Down => "down",
            NuclearState::Up => "up",
        }
    }
}

/// Orientation of (¹⁵N, ¹³C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig {
    pub n: NuclearState,
    pub c: NuclearState,
}

impl SpinConfig {
    pub const ALL: [SpinConfig; 4] = [
        SpinConfig { n: NuclearState::Down, c: NuclearState::Down },
        SpinConfig { n: NuclearState::Down, c: NuclearState::Up },
        SpinConfig { n: NuclearState::Up, c: NuclearState::Down },
        SpinConfig { n: NuclearState::Up, c: NuclearState::Up },
    ];

    /// The configuration both channels are pumped into.
    pub const PUMPED: SpinConfig = SpinConfig { n: NuclearState::Down, c: NuclearState::Down };

    pub fn label(&self) -> String {
        format!("n_{}.c_{}", self.n.name(), self.c.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSpinLine {
    pub config: SpinConfig,
    /// MHz
    pub frequency: f64,
}

/// ν(m_N, m_C) = D_gs + s·γ_e·B + s·(A_gs·m_N + A_C·m_C), in
/// [`SpinConfig::ALL`] order.
pub fn two_spin_line_positions(params: &TwoSpinParams, field: FieldConfig, manifold: Manifold) -> [TwoSpinLine; 4] {
    let s = manifold.sign();
    let base = &params.base;
    let center = base.d_gs + s * base.gamma_e * field.b;
    SpinConfig::ALL.map(|config| TwoSpinLine {
        config,
        frequency: center + s * (base.a_gs * config.n.m() + params.a_gs_c13 * config.c.m()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSpinPopulations {
    /// ρ[m_N][m_C], index 0 = down, 1 = up.
    pub rho: [[f64; 2]; 2],
}

impl TwoSpinPopulations {
    pub fn new(rho: [[f64; 2]; 2]) -> Result<Self, RegisterError> {
        let flat = rho.iter().flatten();
        if flat.clone().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(RegisterError::Populations(format!("entry outside [0, 1]: {rho:?}")));
        }
        let sum: f64 = flat.sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(RegisterError::Populations(format!("sum = {sum}")));
        }
        Ok(Self { rho })
    }

    /// Product state of two independent marginals with polarizations
    /// P = ρ(↓) − ρ(↑).
    pub fn from_marginals(p_n: f64, p_c: f64) -> Self {
        let n = [(1.0 + p_n) / 2.0, (1.0 - p_n) / 2.0];
        let c = [(1.0 + p_c) / 2.0, (1.0 - p_c) / 2.0];
        Self { rho: [[n[0] * c[0], n[0] * c[1]], [n[1] * c[0], n[1] * c[1]]] }
    }

    pub fn get(&self, config: SpinConfig) -> f64 {
        self.rho[config.n.index()][config.c.index()]
    }

    pub fn total(&self) -> f64 {
        self.rho.iter().flatten().sum()
    }

    /// ¹⁵N polarization ρ(N↓) − ρ(N↑).
    pub fn p_n(&self) -> f64 {
        (self.rho[0][0] + self.rho[0][1]) - (self.rho[1][0] + self.rho[1][1])
    }

    /// ¹³C polarization ρ(C↓) − ρ(C↑).
    pub fn p_c(&self) -> f64 {
        (self.rho[0][0] + self.rho[1][0]) - (self.rho[0][1] + self.rho[1][1])
    }
}

pub fn two_spin_steady_state(params: &TwoSpinParams, field: FieldConfig) -> Result<TwoSpinPopulations, RegisterError> {
    let a_es_c13 = params.a_es_c13.ok_or(RegisterError::MissingC13Coupling)?;
    let p_n = steady_state_polarization(&params.base, field)?.p;
    let carbon = SpinSystemParams { a_es: a_es_c13, ..params.base };
    let p_c = steady_state_polarization(&carbon, field)?.p;
    Ok(TwoSpinPopulations::from_marginals(p_n, p_c))
}

/// Target line against all other lines: (ρ_t − Σ_other ρ)/Σ ρ.
pub fn joint_polarization(pops: &TwoSpinPopulations, target: SpinConfig) -> f64 {
    let total = pops.total();
    let t = pops.get(target);
    (t - (total - t)) / total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPolarization {
    pub target_vs_rest: f64,
    pub product_of_marginals: f64,
    pub p_n: f64,
    pub p_c: f64,
}

/// The adopted target-vs-rest value next to the product P_N·P_C.
pub fn polarization_summary(pops: &TwoSpinPopulations, target: SpinConfig) -> JointPolarization {
    JointPolarization {
        target_vs_rest: joint_polarization(pops, target),
        product_of_marginals: pops.p_n() * pops.p_c(),
        p_n: pops.p_n(),
        p_c: pops.p_c(),
    }
}
