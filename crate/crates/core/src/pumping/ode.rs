use serde::{Deserialize, Serialize};

use super::{flip_probabilities, PolarizationState, PumpingError};
use crate::params::{FieldConfig, SpinSystemParams};

/// Default RK4 step, in units of 1/Γ.
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeSample {
    pub t: f64,
    pub state: PolarizationState,
}

/// Integrates dP/dt = (1−P)p₊/2 − (1+P)p₋/2 − k·P with fixed-step RK4,
/// time in units of 1/Γ. The last step is shortened to land on `t_end`.
///
/// The returned series starts with the initial state at t = 0.
pub fn evolve_polarization(
    params: &SpinSystemParams,
    field: FieldConfig,
    p0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<OdeSample>, PumpingError> {
    if !(p0.abs() <= 1.0) {
        return Err(PumpingError::InvalidArgument(format!("|p0| = {} > 1", p0.abs())));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PumpingError::InvalidArgument(format!("dt = {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(PumpingError::InvalidArgument(format!("t_end = {t_end}")));
    }
    if !(params.k_ratio >= 0.0) {
        return Err(PumpingError::InvalidArgument(format!("k_ratio = {}", params.k_ratio)));
    }

    let flips = flip_probabilities(params, field);
    let (pp, pm, k) = (flips.p_plus, flips.p_minus, params.k_ratio);
    let rhs = |p: f64| 0.5 * (1.0 - p) * pp - 0.5 * (1.0 + p) * pm - k * p;

    let n_steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut p = p0;
    out.push(OdeSample { t: 0.0, state: PolarizationState::from_polarization(p) });
    for i in 0..n_steps {
        let t = i as f64 * dt;
        let h = dt.min(t_end - t);
        let k1 = rhs(p);
        let k2 = rhs(p + 0.5 * h * k1);
        let k3 = rhs(p + 0.5 * h * k2);
        let k4 = rhs(p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if p.abs() > 1.0 + 1e-12 {
            return Err(PumpingError::StepRejected { dt, t });
        }
        p = p.clamp(-1.0, 1.0);
        let t_next = if i + 1 == n_steps { t_end } else { t + h };
        out.push(OdeSample { t: t_next, state: PolarizationState::from_polarization(p) });
    }
    Ok(out)
}
