//! Seeded fit-stability studies. Each runs a fixed set of seeds, so the
//! outcome is reproducible; the thresholds leave room for the expected
//! statistical spread.

use lacpump::spectra::{assign_labels, uniform_grid, window_grid};
use lacpump::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn synthetic_points(params: &SpinSystemParams, sigma: f64, seed: u64) -> Vec<PolarizationPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    uniform_grid(300.0, 600.0, 12.5)
        .into_iter()
        .map(|b| {
            let p = steady_state_polarization(params, FieldConfig::gauss(b)).unwrap().p;
            PolarizationPoint { b_gauss: b, p: p + noise.sample(&mut rng), sigma }
        })
        .collect()
}

#[test]
fn k_ratio_recovery_over_seeds() {
    let truth = SpinSystemParams::default();
    let mut hits = 0;
    for seed in 0..100 {
        let data = synthetic_points(&truth, 0.01, seed);
        assert_eq!(data.len(), 25);
        let fit = fit_k_ratio(&truth, &data, &KRatioFitOptions::default()).unwrap();
        assert!(fit.converged && !fit.advisory);
        if (fit.values[0] - 0.009).abs() <= 0.002 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100 within ±0.002");
}

#[test]
fn k_ratio_recovery_at_strong_depolarization() {
    let truth = SpinSystemParams::default().with_k_ratio(0.05);
    let mut hits = 0;
    for seed in 0..100 {
        let fit = fit_k_ratio(&truth, &synthetic_points(&truth, 0.01, seed), &KRatioFitOptions::default()).unwrap();
        if (fit.values[0] / 0.05 - 1.0).abs() <= 0.05 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100 within 5%");
}

#[test]
fn doublet_centers_over_seeds() {
    let (c_up, c_down) = (2867.0, 2870.05);
    let truth = [LorentzianLine::new(c_up, 1.0, 0.3), LorentzianLine::new(c_down, 1.0, 0.3)];
    let grid = uniform_grid(2858.0, 2879.0, 0.01);
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let opts = SynthesisOptions { noise_sigma: 0.01, seed, ..Default::default() };
        let s = synthesize_spectrum(&truth, &grid, &opts).unwrap();
        let f = fit_spectrum(&s, 2, &InitStrategy::Auto, &FitOptions::default()).unwrap();
        worst = worst.max((f.lines()[0].center - c_up).abs()).max((f.lines()[1].center - c_down).abs());
    }
    assert!(worst < 0.1, "worst center error {worst} MHz");
}

#[test]
fn rabi_frequency_over_seeds() {
    let f_r = 2.5;
    let times = uniform_grid(0.0, 5.0 / f_r, 0.02);
    let mut hits = 0;
    for seed in 0..100 {
        let trace =
            synthesize_rabi(0.0, RabiLine::Down, 2870.0, f_r, 0.3, &times).unwrap().with_noise(0.02, seed).unwrap();
        let fit = fit_rabi(&trace).unwrap();
        if fit.rabi_frequency.is_some_and(|f| (f / f_r - 1.0).abs() < 0.01) {
            hits += 1;
        }
    }
    assert_eq!(hits, 100);
}

#[test]
fn polarization_round_trip_at_500_gauss() {
    let params = SpinSystemParams::default();
    let b = FieldConfig::gauss(500.0);
    let p = steady_state_polarization(&params, b).unwrap().p;
    let esr = ground_esr_frequencies(&params, b, Manifold::Minus);
    let truth = [
        LorentzianLine::new(esr.up, 1.0, 0.25 * (1.0 - p)).labeled("up"),
        LorentzianLine::new(esr.down, 1.0, 0.25 * (1.0 + p)).labeled("down"),
    ];
    let grid = window_grid(&[esr.up, esr.down], 10.0, 0.002);
    let guesses: Vec<LorentzianLine> =
        truth.iter().map(|l| LorentzianLine { width: 1.5, area: 0.1, ..l.clone() }).collect();
    let opts = FitOptions { shared_width: true, ..Default::default() };
    for seed in 0..10 {
        let s = synthesize_spectrum(&truth, &grid, &SynthesisOptions { noise_sigma: 0.01, seed, ..Default::default() })
            .unwrap();
        let f = fit_spectrum(&s, 2, &InitStrategy::Guesses(guesses.clone()), &opts).unwrap();
        let est = extract_polarization(&f, "up", "down").unwrap();
        assert!((est.p - p).abs() < 0.01, "seed {seed}: {} vs {p}", est.p);
        assert!(est.sigma > 0.0 && est.sigma < 0.01);
    }
}

#[test]
fn two_spin_joint_polarization_round_trip() {
    let params = TwoSpinParams::default();
    let field = FieldConfig::gauss(500.0);
    // ρ_N = ρ_C = sqrt(0.95) puts 0.95 in the pumped configuration
    let p_marg = 2.0 * 0.95f64.sqrt() - 1.0;
    let pops = TwoSpinPopulations::from_marginals(p_marg, p_marg);
    let expected = joint_polarization(&pops, SpinConfig::PUMPED);
    assert!((expected - 0.90).abs() < 1e-12);

    let lines = two_spin_line_positions(&params, field, Manifold::Minus);
    let truth: Vec<LorentzianLine> = lines
        .iter()
        .map(|l| LorentzianLine::new(l.frequency, 1.0, 0.5 * pops.get(l.config)).labeled(l.config.label()))
        .collect();
    let centers: Vec<f64> = lines.iter().map(|l| l.frequency).collect();
    let grid = window_grid(&centers, 8.0, 0.005);
    let opts = FitOptions { shared_width: true, ..Default::default() };
    for seed in 0..10 {
        let s =
            synthesize_spectrum(&truth, &grid, &SynthesisOptions { noise_sigma: 0.002, seed, ..Default::default() })
                .unwrap();
        let guesses = truth.iter().map(|l| LorentzianLine { area: 0.05, width: 1.5, ..l.clone() }).collect();
        let mut f = fit_spectrum(&s, 4, &InitStrategy::Guesses(guesses), &opts).unwrap();
        let expect: Vec<(String, f64)> = lines.iter().map(|l| (l.config.label(), l.frequency)).collect();
        let expect_ref: Vec<(&str, f64)> = expect.iter().map(|(s, c)| (s.as_str(), *c)).collect();
        assign_labels(&mut f, &expect_ref);

        let area = |c: SpinConfig| f.lines()[f.line_index(&c.label()).unwrap()].area;
        let total: f64 = SpinConfig::ALL.iter().map(|&c| area(c)).sum();
        let rho = [
            [area(SpinConfig::ALL[0]) / total, area(SpinConfig::ALL[1]) / total],
            [area(SpinConfig::ALL[2]) / total, area(SpinConfig::ALL[3]) / total],
        ];
        let fitted = TwoSpinPopulations { rho };
        let joint = joint_polarization(&fitted, SpinConfig::PUMPED);
        assert!((joint - 0.90).abs() < 0.01, "seed {seed}: {joint}");
    }
}
