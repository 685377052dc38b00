use std::fs;
use std::path::{Path, PathBuf};

use lacpump::io::write_points_csv;
use lacpump::{steady_state_polarization, FieldConfig, PolarizationPoint, SpinSystemParams};
use lacpump_cli::main_with_args;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("lacpump").chain(args.iter().copied()))
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eigen_writes_schema_and_locates_the_anti_crossing() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("eigen");
    assert_eq!(run(&["eigen", "--b-min", "400", "--b-max", "600", "--b-step", "0.5", "--out", s(&out)]), 0);
    let (header, rows) = read_table(&out.join("eigen.csv"));
    assert_eq!(header, ["b_gauss", "e1_mhz", "e2_mhz", "e3_mhz", "e4_mhz", "alpha", "beta", "pmix"]);
    assert_eq!(rows.len(), 401);
    assert_eq!(rows[0][0], 400.0);
    assert_eq!(rows[400][0], 600.0);
    let report = read_json(&out.join("eigen.json"));
    let b_min = report["min_gap"]["b_gauss"].as_f64().unwrap();
    assert!((b_min - 517.5).abs() <= 0.5, "{b_min}");
    assert!(report["max_pmix_numeric_deviation"].as_f64().unwrap() < 1e-10);
    for r in &rows {
        assert!((r[5] * r[5] + r[6] * r[6] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn empty_config_equals_defaults() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "{}");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["polarization", "--config", s(&cfg), "--out", s(&a)]), 0);
    assert_eq!(run(&["polarization", "--out", s(&b)]), 0);
    assert_eq!(fs::read(a.join("polarization.csv")).unwrap(), fs::read(b.join("polarization.csv")).unwrap());
    let (header, rows) = read_table(&a.join("polarization.csv"));
    assert_eq!(header, ["b_gauss", "p_plus", "p_minus", "omega_mhz", "p_steady"]);
    assert_eq!(rows.len(), 1001);
}

#[test]
fn polarization_ode_column_matches_steady_state() {
    // Within ~18 G of the anti-crossing the relaxation rate exceeds 0.19, so
    // t = 100 leaves a gap below 1e-8.
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"pumping": {"ode": true}}"#);
    let out = tmp.path().join("out");
    assert_eq!(
        run(&[
            "polarization",
            "--config",
            s(&cfg),
            "--b-min",
            "500",
            "--b-max",
            "530",
            "--b-step",
            "10",
            "--out",
            s(&out)
        ]),
        0
    );
    let (header, rows) = read_table(&out.join("polarization.csv"));
    assert_eq!(header.last().unwrap(), "p_ode");
    for r in rows {
        assert!((r[5] - r[4]).abs() < 1e-8, "{r:?}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"pumping": {"mc": {"n_spins": 2000, "n_cycles": 200}},
            "spectra": {"fields": [500], "half_span": 5, "grid_step": 0.01}}"#,
    );
    for cmd in ["eigen", "polarization", "spectrum", "rabi", "mc"] {
        let (a, b) = (tmp.path().join(format!("{cmd}_a")), tmp.path().join(format!("{cmd}_b")));
        for dir in [&a, &b] {
            let code = run(&[
                cmd,
                "--config",
                s(&cfg),
                "--b-min",
                "450",
                "--b-max",
                "550",
                "--b-step",
                "25",
                "--seed",
                "7",
                "--out",
                s(dir),
            ]);
            assert_eq!(code, 0, "{cmd}");
        }
        let manifest = read_json(&a.join("manifest.json"));
        let files = manifest["files"].as_array().unwrap();
        assert!(!files.is_empty());
        for f in files {
            let name = f["path"].as_str().unwrap();
            assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{cmd}: {name}");
        }
        assert_eq!(manifest["files"], read_json(&b.join("manifest.json"))["files"]);
    }
}

#[test]
fn seed_changes_noisy_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"pumping": {"mc": {"n_spins": 1000, "n_cycles": 100}}}"#);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        assert_eq!(
            run(&["mc", "--config", s(&cfg), "--b-min", "500", "--b-max", "500", "--seed", seed, "--out", s(dir)]),
            0
        );
    }
    assert_ne!(fs::read(a.join("mc.csv")).unwrap(), fs::read(b.join("mc.csv")).unwrap());
}

#[test]
fn manifest_lists_every_file_with_its_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"cli": {"gnuplot": true}}"#);
    let out = tmp.path().join("out");
    assert_eq!(run(&["eigen", "--config", s(&cfg), "--b-max", "10", "--out", s(&out)]), 0);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "eigen");
    assert!(manifest["created_utc"].is_string());
    let names: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["eigen.csv", "eigen.json", "eigen.gp"]);
    for f in manifest["files"].as_array().unwrap() {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn mc_agrees_with_steady_state() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"pumping": {"mc": {"n_spins": 20000, "n_cycles": 400, "trajectory_stride": 100}}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(
        run(&["mc", "--config", s(&cfg), "--b-min", "400", "--b-max", "600", "--b-step", "100", "--out", s(&out)]),
        0
    );
    let (header, rows) = read_table(&out.join("mc.csv"));
    assert_eq!(header, ["b_gauss", "p_mc", "std_error", "p_steady", "z_score"]);
    for r in &rows {
        assert!(r[4].abs() < 4.0, "{r:?}");
    }
    let (_, traj) = read_table(&out.join("mc_trajectory.csv"));
    // cycles 0, 100, ..., 400 for each of three fields
    assert_eq!(traj.len(), 15);
    assert_eq!(traj[0][2], 0.0);
}

#[test]
fn spectrum_recovers_the_polarization() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(run(&["spectrum", "--seed", "3", "--out", s(&out)]), 0);
    let report = read_json(&out.join("spectrum_report.json"));
    let spectra = report["spectra"].as_array().unwrap();
    assert_eq!(spectra.len(), 2);
    for sp in spectra {
        assert_eq!(sp["fit"]["status"], "converged");
        assert!(sp["deviation"].as_f64().unwrap() < 0.01, "{sp}");
        let (header, rows) = read_table(&out.join(sp["synthesized_file"].as_str().unwrap()));
        assert_eq!(header[..2], ["freq_mhz", "intensity"]);
        assert!(rows.len() > 1000);
    }
}

#[test]
fn two_spin_spectrum_resolves_four_lines() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"spectra": {"fields": []},
            "register": {"enabled": true, "a_es_c13": 40, "fields": [60],
                         "populations": [[0.9025, 0.0475], [0.0475, 0.0025]], "noise": 0.002}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(run(&["spectrum", "--config", s(&cfg), "--out", s(&out)]), 0);
    let report = read_json(&out.join("spectrum_report.json"));
    let sp = &report["spectra"][0];
    assert_eq!(sp["kind"], "two_spin");
    assert_eq!(sp["fit"]["lines"].as_array().unwrap().len(), 4);
    let joint = sp["extracted_joint"]["target_vs_rest"].as_f64().unwrap();
    assert!((joint - 0.805).abs() < 0.01, "{joint}");
}

#[test]
fn rabi_ratio_follows_polarization() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"spectra": {"rabi": {"polarization": 0.5}}}"#);
    let out = tmp.path().join("out");
    assert_eq!(run(&["rabi", "--config", s(&cfg), "--out", s(&out)]), 0);
    let report = read_json(&out.join("rabi.json"));
    assert!((report["synthesized_ratio"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((report["fitted_polarization"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    let (header, rows) = read_table(&out.join("rabi_up.csv"));
    assert_eq!(header, ["time_us", "signal"]);
    assert_eq!(rows.len(), 251);
}

#[test]
fn fit_kratio_recovers_k_from_a_file() {
    let tmp = TempDir::new().unwrap();
    let params = SpinSystemParams::default();
    let points: Vec<PolarizationPoint> = (0..25)
        .map(|i| {
            let b = 300.0 + 12.5 * i as f64;
            let p = steady_state_polarization(&params, FieldConfig::gauss(b)).unwrap().p;
            PolarizationPoint { b_gauss: b, p, sigma: 0.01 }
        })
        .collect();
    let data = tmp.path().join("data.csv");
    write_points_csv(&points, fs::File::create(&data).unwrap()).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(
        run(&["fit-kratio", "--data", s(&data), "--b-min", "0", "--b-max", "1000", "--b-step", "10", "--out", s(&out)]),
        0
    );
    let report = read_json(&out.join("kratio_fit.json"));
    assert!((report["k_ratio"].as_f64().unwrap() - params.k_ratio).abs() < 1e-6);
    let (_, curve) = read_table(&out.join("kratio_curve.csv"));
    assert_eq!(curve.len(), 101);
}

#[test]
fn usage_and_config_errors_exit_1() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(run(&["nonsense"]), 1);
    assert_eq!(run(&["eigen", "--b-step", "abc"]), 1);
    assert_eq!(run(&["eigen", "--b-min", "10", "--b-max", "0", "--out", s(&out)]), 1);
    assert_eq!(run(&["eigen", "--b-step", "0", "--out", s(&out)]), 1);
    assert_eq!(run(&["fit-kratio", "--out", s(&out)]), 1);
    for bad in ["{", r#"{"unknown": 1}"#, r#"{"spin_core": {"gamma_e": -1}}"#, r#"{"spectra": {"width": 0}}"#] {
        let cfg = write_config(tmp.path(), bad);
        assert_eq!(run(&["eigen", "--config", s(&cfg), "--out", s(&out)]), 1, "{bad}");
    }
    let data = write_config(tmp.path(), "b_gauss,p,sigma\n500,not-a-number,0.01\n");
    assert_eq!(run(&["fit-kratio", "--data", s(&data), "--out", s(&out)]), 1);
}

#[test]
fn missing_files_exit_3() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let missing = tmp.path().join("missing.json");
    assert_eq!(run(&["eigen", "--config", s(&missing), "--out", s(&out)]), 3);
    assert_eq!(run(&["fit-kratio", "--data", s(&missing), "--out", s(&out)]), 3);
    // output directory blocked by a regular file
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(run(&["eigen", "--b-max", "1", "--out", s(&blocker.join("sub"))]), 3);
}

#[test]
fn non_convergence_exits_2_but_still_writes_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg =
        write_config(tmp.path(), r#"{"spectra": {"fields": [500], "max_iter": 1, "half_span": 5, "grid_step": 0.01}}"#);
    let out = tmp.path().join("out");
    assert_eq!(run(&["spectrum", "--config", s(&cfg), "--out", s(&out)]), 2);
    let report = read_json(&out.join("spectrum_report.json"));
    assert_eq!(report["spectra"][0]["fit"]["status"], "not_converged");
    let manifest = read_json(&out.join("manifest.json"));
    assert!(manifest["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().starts_with("failure:")));
}
