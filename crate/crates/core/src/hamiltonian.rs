//! Reduced excited-state Hamiltonian of the NV + ¹⁵N system.
//!
//! Only the m_s ∈ {0, +1} excited-state sublevels are kept and the nuclear
//! Zeeman term is dropped. In the basis
//! `[|+1,↑⟩, |+1,↓⟩, |0,↑⟩, |0,↓⟩]` with the energy origin at |0,↑⟩ the matrix
//! is
//!
//! ```text
//! ε↑+b   0     0   0
//!  0   ε↓+b    a   0
//!  0     a     0   0
//!  0     0     0   0
//! ```
//!
//! so |0,↓⟩ and |+1,↑⟩ are eigenstates and the pair {|+1,↓⟩, |0,↑⟩}
//! anti-crosses when b = −ε↓.

use nalgebra::{Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::params::{FieldConfig, ParamError, SpinSystemParams};

pub const BASIS_LABELS: [&str; 4] = ["|+1,up>", "|+1,down>", "|0,up>", "|0,down>"];

const IDX_P1_DOWN: usize = 1;
const IDX_0_UP: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitedHamiltonian {
    pub matrix: Matrix4<f64>,
    pub basis_labels: [&'static str; 4],
}

impl ExcitedHamiltonian {
    /// Detuning Δ = b + ε↓ of |+1,↓⟩ from |0,↑⟩.
    pub fn detuning(&self) -> f64 {
        self.matrix[(IDX_P1_DOWN, IDX_P1_DOWN)]
    }

    pub fn coupling(&self) -> f64 {
        self.matrix[(IDX_P1_DOWN, IDX_0_UP)]
    }
}

/// Eigenenergies and mixing coefficients at one field value.
///
/// `energies` is labeled, not sorted: `[E(|0,↓⟩), E(|+1,↑⟩), E(|+⟩), E(|−⟩)]`
/// with |+⟩ = α|0,↑⟩ + β|+1,↓⟩ and |−⟩ = β|0,↑⟩ − α|+1,↓⟩. |+⟩ is the branch
/// that is mostly |0,↑⟩ below the LAC (α → 1 at low field).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenStructure {
    pub energies: [f64; 4],
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl EigenStructure {
    /// Maximum nuclear-spin flip probability 4α²β².
    pub fn mixing(&self) -> f64 {
        4.0 * self.alpha * self.alpha * self.beta * self.beta
    }

    /// Gap between the two anti-crossing branches, E(|+⟩) − E(|−⟩).
    pub fn gap(&self) -> f64 {
        self.energies[2] - self.energies[3]
    }
}

pub fn build_excited_hamiltonian(params: &SpinSystemParams, field: FieldConfig) -> ExcitedHamiltonian {
    let b = params.zeeman(field);
    let a = params.coupling();
    let mut m = Matrix4::zeros();
    m[(0, 0)] = params.eps_up() + b;
    m[(IDX_P1_DOWN, IDX_P1_DOWN)] = params.eps_down() + b;
    m[(IDX_P1_DOWN, IDX_0_UP)] = a;
    m[(IDX_0_UP, IDX_P1_DOWN)] = a;
    ExcitedHamiltonian { matrix: m, basis_labels: BASIS_LABELS }
}

/// Closed-form diagonalization of the coupled 2×2 block.
///
/// The phase is fixed by α ≥ 0; β then carries the sign of the coupling.
/// For a = 0 the states decouple and |+⟩ is identified with |0,↑⟩ (α = 1,
/// β = 0) on both sides of the crossing.
pub fn eigenstructure(h: &ExcitedHamiltonian) -> EigenStructure {
    let delta = h.detuning();
    let a = h.coupling();
    let e_up = h.matrix[(0, 0)];

    if a == 0.0 {
        return EigenStructure { energies: [0.0, e_up, 0.0, delta], alpha: 1.0, beta: 0.0, delta };
    }

    let omega = 0.5 * delta.hypot(2.0 * a);
    // E₊·E₋ = −a², so take the non-cancelling root first.
    let (e_plus, e_minus) = if delta >= 0.0 {
        let ep = 0.5 * delta + omega;
        (ep, -a * a / ep)
    } else {
        let em = 0.5 * delta - omega;
        (-a * a / em, em)
    };
    // Eigenvector of E₊ is ∝ (E₊ on |+1,↓⟩, a on |0,↑⟩).
    let norm = a.hypot(e_plus);
    let alpha = a.abs() / norm;
    let beta = a.signum() * e_plus / norm;

    EigenStructure { energies: [0.0, e_up, e_plus, e_minus], alpha, beta, delta }
}

/// Same quantities as [`eigenstructure`] obtained from a general symmetric
/// eigensolver on the full 4×4 matrix. Used to cross-check the closed form.
pub fn numeric_eigenstructure(h: &ExcitedHamiltonian) -> EigenStructure {
    let eig = SymmetricEigen::new(h.matrix);
    let delta = h.detuning();

    // H commutes with the projector onto span{|+1,↓⟩, |0,↑⟩}, so projecting
    // any eigenvector onto it yields an eigenvector again, even inside a
    // degenerate eigenspace shared with a decoupled level.
    let mut coupled: Vec<(f64, f64, f64)> = (0..4)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            (v[IDX_P1_DOWN], v[IDX_0_UP], eig.eigenvalues[k])
        })
        .collect();
    coupled.sort_by(|x, y| (y.0.hypot(y.1)).total_cmp(&x.0.hypot(x.1)));
    coupled.truncate(2);
    coupled.sort_by(|x, y| y.2.total_cmp(&x.2));

    let (x, y, e_plus) = coupled[0];
    let e_minus = coupled[1].2;
    let n = x.hypot(y);
    let (x, y) = (x / n, y / n);
    let s = if y < 0.0 { -1.0 } else { 1.0 };
    let mut alpha = s * y;
    let mut beta = s * x;
    // Decoupled levels: the eigenvalue whose eigenvector is dominated by
    // that basis state.
    let decoupled = |idx: usize| {
        eig.eigenvalues
            .iter()
            .zip(eig.eigenvectors.column_iter())
            .max_by(|x, y| x.1[idx].abs().total_cmp(&y.1[idx].abs()))
            .map(|(e, _)| *e)
            .unwrap_or(0.0)
    };
    let mut energies = [decoupled(3), decoupled(0), e_plus, e_minus];
    if h.coupling() == 0.0 {
        // Keep the |+⟩ ≡ |0,↑⟩ labeling of the closed form.
        alpha = 1.0;
        beta = 0.0;
        energies[2] = 0.0;
        energies[3] = delta;
    }
    EigenStructure { energies, alpha, beta, delta }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LacPosition {
    pub field_gauss: f64,
    /// Set when A_es = 0: the levels cross exactly and the gap closes.
    pub true_crossing: bool,
}

/// Field B* = −ε↓/γ_e at which the |+1,↓⟩–|0,↑⟩ gap is minimal.
pub fn lac_position(params: &SpinSystemParams) -> Result<LacPosition, ParamError> {
    if !(params.gamma_e.is_finite() && params.gamma_e > 0.0) {
        return Err(ParamError::GammaE(params.gamma_e));
    }
    Ok(LacPosition { field_gauss: -params.eps_down() / params.gamma_e, true_crossing: params.a_es == 0.0 })
}

/// Ground-state microwave manifold probed by ODMR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    /// m_s = 0 → −1
    #[default]
    Minus,
    /// m_s = 0 → +1
    Plus,
}

impl Manifold {
    pub fn sign(self) -> f64 {
        match self {
            Manifold::Minus => -1.0,
            Manifold::Plus => 1.0,
        }
    }
}

/// Ground-state ESR line pair, MHz. `up` is the line of m_I = +1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsrLines {
    pub up: f64,
    pub down: f64,
}

impl EsrLines {
    pub fn splitting(&self) -> f64 {
        (self.up - self.down).abs()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.up + self.down)
    }
}

/// ν(m_I) = D_gs + s·γ_e·B + s·A_gs·m_I, nuclear Zeeman neglected.
pub fn ground_esr_frequencies(params: &SpinSystemParams, field: FieldConfig, manifold: Manifold) -> EsrLines {
    let s = manifold.sign();
    let center = params.d_gs + s * params.gamma_e * field.b;
    let half = 0.5 * s * params.a_gs;
    EsrLines { up: center + half, down: center - half }
}
