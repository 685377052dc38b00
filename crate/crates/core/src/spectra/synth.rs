use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_grid, LorentzianLine, Polarity, SpectraError, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    pub baseline: f64,
    /// Additive Gaussian noise, absolute intensity units.
    pub noise_sigma: f64,
    pub seed: u64,
    pub polarity: Polarity,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { baseline: 1.0, noise_sigma: 0.0, seed: 0, polarity: Polarity::Dip }
    }
}

/// Evenly spaced grid from `start` to `stop` inclusive (last point may fall
/// short of `stop` by less than one step).
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || !(stop >= start) {
        return Vec::new();
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

/// Union of uniform windows `center ± half_span`, merged where they overlap.
/// Useful for line clusters far apart (e.g. the ¹³C doublet).
pub fn window_grid(centers: &[f64], half_span: f64, step: f64) -> Vec<f64> {
    let mut spans: Vec<(f64, f64)> = centers.iter().map(|c| (c - half_span, c + half_span)).collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in spans {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let mut grid = Vec::new();
    for (lo, hi) in merged {
        for nu in uniform_grid(lo, hi, step) {
            if grid.last().is_none_or(|&last: &f64| nu > last) {
                grid.push(nu);
            }
        }
    }
    grid
}

pub fn synthesize_spectrum(
    lines: &[LorentzianLine],
    grid: &[f64],
    opts: &SynthesisOptions,
) -> Result<Spectrum, SpectraError> {
    check_grid(grid)?;
    if !(opts.baseline > 0.0 && opts.baseline.is_finite()) {
        return Err(SpectraError::InvalidInput(format!("baseline {}", opts.baseline)));
    }
    if !(opts.noise_sigma >= 0.0 && opts.noise_sigma.is_finite()) {
        return Err(SpectraError::InvalidInput(format!("noise_sigma {}", opts.noise_sigma)));
    }
    for l in lines {
        l.check()?;
    }

    let sign = opts.polarity.sign();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let noise = Normal::new(0.0, opts.noise_sigma).map_err(|e| SpectraError::InvalidInput(e.to_string()))?;
    let mut clipped = false;
    let intensities = grid
        .iter()
        .map(|&nu| {
            let depth: f64 = lines.iter().map(|l| l.depth(nu)).sum();
            let mut v = opts.baseline * (1.0 + sign * depth);
            if opts.noise_sigma > 0.0 {
                v += noise.sample(&mut rng);
            }
            if v < 0.0 {
                clipped = true;
                v = 0.0;
            }
            v
        })
        .collect();
    if clipped {
        log::warn!("total dip depth exceeds the baseline; intensities clipped at 0");
    }

    Ok(Spectrum {
        frequencies: grid.to_vec(),
        intensities,
        lines: lines.to_vec(),
        noise_sigma: (opts.noise_sigma > 0.0).then_some(opts.noise_sigma),
        polarity: opts.polarity,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_without_lines() {
        let grid = uniform_grid(2860.0, 2880.0, 0.5);
        let s = synthesize_spectrum(&[], &grid, &SynthesisOptions { baseline: 3.0, ..Default::default() }).unwrap();
        assert!(s.intensities.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn dip_area_by_quadrature() {
        let line = LorentzianLine::new(2870.0, 1.0, 0.2);
        let grid = uniform_grid(2820.0, 2920.0, 0.001);
        let s = synthesize_spectrum(&[line], &grid, &SynthesisOptions { baseline: 2.0, ..Default::default() }).unwrap();
        let f: Vec<f64> = s.intensities.iter().map(|v| (2.0 - v) / 2.0).collect();
        let integral: f64 = grid.windows(2).zip(f.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum();
        assert!((integral - 0.2).abs() / 0.2 < 0.01, "{integral}");
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let grid = uniform_grid(0.0, 10.0, 0.1);
        let opts = SynthesisOptions { noise_sigma: 0.01, seed: 9, ..Default::default() };
        let a = synthesize_spectrum(&[], &grid, &opts).unwrap();
        let b = synthesize_spectrum(&[], &grid, &opts).unwrap();
        assert_eq!(a.intensities, b.intensities);
        let c = synthesize_spectrum(&[], &grid, &SynthesisOptions { seed: 10, ..opts }).unwrap();
        assert_ne!(a.intensities, c.intensities);
    }

    #[test]
    fn clipping_is_flagged() {
        let line = LorentzianLine::new(5.0, 0.1, 1.0);
        let s = synthesize_spectrum(&[line], &uniform_grid(0.0, 10.0, 0.01), &Default::default()).unwrap();
        assert!(s.clipped);
        assert!(s.intensities.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn peak_polarity() {
        let line = LorentzianLine::new(5.0, 1.0, 0.1);
        let opts = SynthesisOptions { polarity: Polarity::Peak, ..Default::default() };
        let s = synthesize_spectrum(std::slice::from_ref(&line), &[5.0], &opts).unwrap();
        assert!((s.intensities[0] - (1.0 + line.peak_depth())).abs() < 1e-15);
    }

    #[test]
    fn windows_merge() {
        let g = window_grid(&[0.0, 1.0, 100.0], 2.0, 0.5);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.first(), Some(&-2.0));
        assert_eq!(g.last(), Some(&102.0));
        assert!(!g.iter().any(|&v| v > 3.0 && v < 98.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(synthesize_spectrum(&[], &[1.0, 0.5], &Default::default()).is_err());
        let opts = SynthesisOptions { baseline: 0.0, ..Default::default() };
        assert!(synthesize_spectrum(&[], &[1.0], &opts).is_err());
        let bad = LorentzianLine::new(1.0, 0.0, 0.1);
        assert!(synthesize_spectrum(&[bad], &[1.0], &Default::default()).is_err());
    }
}
