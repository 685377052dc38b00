//! Stochastic pump-cycle simulation of an ensemble of classical two-state
//! nuclear spins.
//!
//! Each cycle a spin in ↑ flips with probability p₊, a spin in ↓ with p₋,
//! and then every spin flips with probability q = k/(1 + 2k) toward
//! equilibrium. That q makes the fixed point of the per-cycle mean map
//! exactly (p₊ − p₋)/(2k + p₊ + p₋): one pump cycle corresponds to 2/Γ of
//! the continuous rate model, over which relaxation contributes −2k·P.
//!
//! Spins are independent and exchangeable, so the ensemble is advanced as
//! occupation counts with binomial draws, which has the same distribution
//! as flipping spins one at a time. The ensemble is cut into fixed chunks,
//! each with its own ChaCha stream `(seed, chunk index)`, so results do not
//! depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{flip_probabilities, PolarizationState, PumpingError};
use crate::params::{FieldConfig, SpinSystemParams};

/// Spins per independent random stream.
pub const CHUNK_SPINS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_spins: u64,
    pub n_cycles: usize,
    pub seed: u64,
    /// Initial polarization of the ensemble.
    pub p0: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { n_spins: 100_000, n_cycles: 2000, seed: 0, p0: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub state: PolarizationState,
    /// Standard error of the final ensemble mean.
    pub std_error: f64,
    /// Ensemble polarization after each cycle, starting with the initial one.
    pub trajectory: Vec<f64>,
}

/// Relaxation flip probability per cycle for depolarization ratio `k`.
pub fn relaxation_flip_probability(k_ratio: f64) -> f64 {
    k_ratio / (1.0 + 2.0 * k_ratio)
}

fn binomial(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    // p ∈ (0, 1) here, so construction cannot fail.
    Binomial::new(n, p).map(|d| d.sample(rng)).unwrap_or(0)
}

fn run_chunk(index: u64, n: u64, up0: u64, leave_up: f64, enter_up: f64, opts: &McOptions) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index);
    let mut up = up0;
    let mut counts = Vec::with_capacity(opts.n_cycles + 1);
    counts.push(up);
    for _ in 0..opts.n_cycles {
        let stay = up - binomial(up, leave_up, &mut rng);
        let arrive = binomial(n - up, enter_up, &mut rng);
        up = stay + arrive;
        counts.push(up);
    }
    counts
}

pub fn monte_carlo_polarization(
    params: &SpinSystemParams,
    field: FieldConfig,
    opts: &McOptions,
) -> Result<McResult, PumpingError> {
    if opts.n_spins == 0 || opts.n_cycles == 0 {
        return Err(PumpingError::InvalidArgument("n_spins and n_cycles must be >= 1".into()));
    }
    if !(opts.p0.abs() <= 1.0) {
        return Err(PumpingError::InvalidArgument(format!("|p0| = {} > 1", opts.p0.abs())));
    }
    if !(params.k_ratio >= 0.0) {
        return Err(PumpingError::InvalidArgument(format!("k_ratio = {}", params.k_ratio)));
    }

    let flips = flip_probabilities(params, field);
    let q = relaxation_flip_probability(params.k_ratio);
    // Pump then relax: net per-cycle transition probabilities.
    let leave_up = flips.p_plus * (1.0 - q) + (1.0 - flips.p_plus) * q;
    let enter_up = flips.p_minus * (1.0 - q) + (1.0 - flips.p_minus) * q;

    let n_chunks = opts.n_spins.div_ceil(CHUNK_SPINS);
    let chunks: Vec<Vec<u64>> = (0..n_chunks)
        .into_par_iter()
        .map(|i| {
            let n = CHUNK_SPINS.min(opts.n_spins - i * CHUNK_SPINS);
            let up0 = ((n as f64) * (1.0 - opts.p0) / 2.0).round() as u64;
            run_chunk(i, n, up0.min(n), leave_up, enter_up, opts)
        })
        .collect();

    let n = opts.n_spins as f64;
    let trajectory: Vec<f64> = (0..=opts.n_cycles)
        .map(|c| {
            let up: u64 = chunks.iter().map(|v| v[c]).sum();
            (n - 2.0 * up as f64) / n
        })
        .collect();

    let p = *trajectory.last().unwrap_or(&opts.p0);
    let std_error = if opts.n_spins > 1 { ((1.0 - p * p).max(0.0) / (n - 1.0)).sqrt() } else { 0.0 };
    Ok(McResult { state: PolarizationState::from_polarization(p), std_error, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pumping::{steady_state_from, steady_state_polarization};

    #[test]
    fn frozen_without_dynamics() {
        let params = SpinSystemParams { a_es: 0.0, k_ratio: 0.0, ..Default::default() };
        let opts = McOptions { n_spins: 1000, n_cycles: 50, seed: 1, p0: 0.4 };
        let r = monte_carlo_polarization(&params, FieldConfig::gauss(300.0), &opts).unwrap();
        assert!(r.trajectory.iter().all(|&p| p == 0.4));
        assert_eq!(r.trajectory.len(), 51);
    }

    #[test]
    fn deterministic_for_seed() {
        let params = SpinSystemParams::default();
        let opts = McOptions { n_spins: 200_000, n_cycles: 100, seed: 42, p0: 0.0 };
        let a = monte_carlo_polarization(&params, FieldConfig::gauss(500.0), &opts).unwrap();
        let b = monte_carlo_polarization(&params, FieldConfig::gauss(500.0), &opts).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_polarization(&params, FieldConfig::gauss(500.0), &McOptions { seed: 43, ..opts }).unwrap();
        assert_ne!(a.trajectory, c.trajectory);
    }

    #[test]
    fn mean_map_fixed_point_is_closed_form() {
        // Iterate the expected per-cycle map P ↦ E[P'] deterministically.
        for (b, k) in [(500.0, 0.009), (517.0, 0.05), (450.0, 0.0), (-480.0, 0.2)] {
            let params = SpinSystemParams::default().with_k_ratio(k);
            let f = flip_probabilities(&params, FieldConfig::gauss(b));
            let q = relaxation_flip_probability(k);
            let mut p = 0.0f64;
            for _ in 0..20_000 {
                let pumped = p + (1.0 - p) * f.p_plus - (1.0 + p) * f.p_minus;
                p = pumped * (1.0 - 2.0 * q);
            }
            let expect = steady_state_from(&f, k).unwrap();
            assert!((p - expect).abs() < 1e-12, "B={b} k={k}: {p} vs {expect}");
        }
    }

    #[test]
    fn agrees_with_steady_state() {
        let params = SpinSystemParams::default();
        let b = FieldConfig::gauss(500.0);
        let opts = McOptions { n_spins: 100_000, n_cycles: 2000, seed: 7, p0: 0.0 };
        let r = monte_carlo_polarization(&params, b, &opts).unwrap();
        let exact = steady_state_polarization(&params, b).unwrap().p;
        assert!((r.state.p - exact).abs() < 3.0 * r.std_error, "{} vs {exact} ± {}", r.state.p, r.std_error);
    }

    #[test]
    fn rejects_empty_ensemble() {
        let params = SpinSystemParams::default();
        let opts = McOptions { n_spins: 0, ..Default::default() };
        assert!(monte_carlo_polarization(&params, FieldConfig::gauss(0.0), &opts).is_err());
    }
}
