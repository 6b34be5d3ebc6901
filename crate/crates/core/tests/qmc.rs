use std::f64::consts::PI;

use pdtc_core::ionchain::{truncate_chain_at, ChainModel, CouplingMatrix, EXPERIMENT_J0};
use pdtc_core::qmc::{
    assemble_scan, classical_thermal_energy, configuration_weights, exact_spectrum, finite_difference_heat_capacity,
    sample_configurations, thermal_energy, ThermalConfig, ThermalEstimate,
};
use pdtc_core::Error;

const J0: f64 = EXPERIMENT_J0;
const B_Y: f64 = 2.0 * PI * 500.0;

fn chain(n: usize) -> CouplingMatrix {
    let model = ChainModel::experiment().unwrap();
    truncate_chain_at(&model.couplings, n, (25 - n) / 2).unwrap()
}

fn config(n: usize, b_y: f64, betas: Vec<f64>, sweeps: usize) -> ThermalConfig {
    let mut cfg = ThermalConfig::new(chain(n), b_y, J0, betas).unwrap();
    cfg.sweeps = sweeps;
    cfg.thermalization = sweeps / 10;
    cfg.dtau = 0.025;
    cfg.seed = 7;
    cfg
}

fn exact_estimate(beta: f64, energy: f64) -> ThermalEstimate {
    ThermalEstimate {
        beta,
        energy,
        energy_error: 1e-6,
        abs_magnetization: 0.0,
        abs_magnetization_error: 0.0,
        slices: 1,
        poorly_decorrelated: false,
    }
}

#[test]
fn quantum_energy_matches_exact_diagonalization() {
    let betas = vec![0.05, 0.15, 0.3, 0.6];
    let cfg = config(6, B_Y, betas.clone(), 40_000);
    let spectrum = exact_spectrum(&cfg).unwrap();
    for (k, beta) in betas.iter().enumerate() {
        let est = thermal_energy(&cfg, *beta, k as u64).unwrap();
        let exact = spectrum.thermal_energy(*beta);
        assert!(
            (est.energy - exact).abs() < 3.0 * est.energy_error,
            "beta {beta}: {} ± {} vs {exact}",
            est.energy,
            est.energy_error
        );
    }
}

#[test]
fn classical_limit_matches_enumeration() {
    let betas = vec![0.1, 0.3, 1.0];
    let cfg = config(8, 0.0, betas.clone(), 40_000);
    for (k, beta) in betas.iter().enumerate() {
        let est = thermal_energy(&cfg, *beta, k as u64).unwrap();
        assert_eq!(est.slices, 1);
        let exact = classical_thermal_energy(&cfg.couplings, J0, *beta);
        assert!(
            (est.energy - exact).abs() < 3.0 * est.energy_error,
            "beta {beta}: {} ± {} vs {exact}",
            est.energy,
            est.energy_error
        );
    }
}

#[test]
fn infinite_temperature_energy_vanishes() {
    let cfg = config(6, B_Y, vec![1e-3], 40_000);
    let est = thermal_energy(&cfg, 1e-3, 0).unwrap();
    assert!(est.energy.abs() < 3.0 * est.energy_error, "{} ± {}", est.energy, est.energy_error);
}

#[test]
fn cluster_updates_sample_gibbs_weights() {
    let pair = CouplingMatrix::from_fn(2, |_, _| J0).unwrap();
    let mut cfg = ThermalConfig::new(pair, 0.7 * J0, J0, vec![0.25]).unwrap();
    cfg.dtau = 0.1;
    cfg.thermalization = 100;
    cfg.seed = 3;
    assert_eq!(cfg.slices(0.25), 3);

    let samples = 100_000;
    let counts = sample_configurations(&cfg, 0.25, samples, 0).unwrap();
    let weights = configuration_weights(&cfg, 0.25);
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for (c, w) in counts.iter().zip(&weights) {
        let expected = w * samples as f64;
        if expected >= 5.0 {
            chi2 += (*c as f64 - expected).powi(2) / expected;
            dof += 1;
        } else {
            assert!((*c as f64) < 5.0 + 5.0 * expected.sqrt() + 10.0);
        }
    }
    let dof = (dof - 1) as f64;
    assert!(chi2 < dof + 3.0 * (2.0 * dof).sqrt(), "chi2 {chi2} with {dof} dof");
}

#[test]
fn identical_seed_gives_identical_estimates() {
    let cfg = config(5, B_Y, vec![0.2], 2_000);
    let a = thermal_energy(&cfg, 0.2, 4).unwrap();
    let b = thermal_energy(&cfg, 0.2, 4).unwrap();
    assert_eq!(a, b);
    let c = thermal_energy(&cfg, 0.2, 5).unwrap();
    assert_ne!(a.energy, c.energy);
}

#[test]
fn halving_the_time_step_is_within_noise() {
    let mut cfg = config(6, B_Y, vec![0.5], 40_000);
    let coarse = thermal_energy(&cfg, 0.5, 0).unwrap();
    cfg.dtau *= 0.5;
    let fine = thermal_energy(&cfg, 0.5, 0).unwrap();
    assert_eq!(fine.slices, 2 * coarse.slices);
    let sigma = coarse.energy_error.hypot(fine.energy_error);
    assert!((coarse.energy - fine.energy).abs() < 3.0 * sigma);
}

#[test]
fn order_parameter_rises_with_beta() {
    let betas = [0.02, 0.2, 1.0];
    let cfg = config(8, B_Y, betas.to_vec(), 5_000);
    let m: Vec<f64> = betas
        .iter()
        .enumerate()
        .map(|(k, b)| thermal_energy(&cfg, *b, k as u64).unwrap().abs_magnetization)
        .collect();
    assert!(m[0] < m[1] && m[1] < m[2], "{m:?}");
    assert!(m[0] < 0.4 && m[2] > 0.85, "{m:?}");
}

#[test]
fn finite_differences_are_exact_for_quadratics() {
    let betas = [0.1, 0.15, 0.3, 0.32, 0.5];
    let e: Vec<f64> = betas.iter().map(|b| 3.0 * b * b - 2.0 * b + 1.0).collect();
    let cv = finite_difference_heat_capacity(&betas, &e, &[0.0; 5]).unwrap();
    for (b, (c, _)) in betas.iter().zip(&cv) {
        let exact = -b * b * (6.0 * b - 2.0);
        assert!((c - exact).abs() < 1e-12, "{c} vs {exact}");
    }
}

#[test]
fn two_level_peak_sits_at_schottky_temperature() {
    // −B σʸ on one spin: gap Δ = 2B, E = −B tanh(βB).
    let b = 1.0;
    let cfg = ThermalConfig::new(CouplingMatrix::from_fn(1, |_, _| 0.0).unwrap(), b * J0, J0, vec![1.0]).unwrap();
    let temps: Vec<f64> = (0..160).map(|k| 0.3 + 0.01 * k as f64).rev().collect();
    let estimates = temps.iter().map(|t| exact_estimate(1.0 / t, -b * (b / t).tanh())).collect();
    let scan = assemble_scan(&cfg, estimates).unwrap();
    // Maximum of x² sech² x at x = Δ/(2T) solves x tanh x = 1.
    let x = {
        let mut x: f64 = 1.2;
        for _ in 0..50 {
            x -= (x * x.tanh() - 1.0) / (x.tanh() + x / x.cosh().powi(2));
        }
        x
    };
    let schottky = b / x;
    for p in &scan.points {
        let y = b * p.estimate.beta;
        let exact = (y / y.cosh()).powi(2);
        assert!((p.heat_capacity - exact).abs() < 2e-2 * exact.max(0.1), "{} vs {exact}", p.heat_capacity);
    }
    let top = scan
        .points
        .iter()
        .max_by(|a, b| a.heat_capacity.total_cmp(&b.heat_capacity))
        .unwrap();
    assert!((1.0 / top.estimate.beta - schottky).abs() <= 0.005 + 1e-12);
    // The anomaly is skewed, so the symmetric fit only brackets it within its half-width.
    assert!((scan.peak.center - schottky).abs() < scan.peak.hwhm);
}

#[test]
fn exact_pipeline_reproduces_direct_crossover() {
    let temps: Vec<f64> = (0..30).map(|k| 1.0 + 0.12 * k as f64).rev().collect();
    let betas: Vec<f64> = temps.iter().map(|t| 1.0 / t).collect();
    let cfg = ThermalConfig::new(chain(8), B_Y, J0, betas.clone()).unwrap();
    let spectrum = exact_spectrum(&cfg).unwrap();
    let estimates = betas.iter().map(|b| exact_estimate(*b, spectrum.thermal_energy(*b))).collect();
    let scan = assemble_scan(&cfg, estimates).unwrap();

    // Golden-section maximum of the exact C_V(T).
    let cv = |t: f64| spectrum.heat_capacity(1.0 / t);
    let (mut lo, mut hi) = (temps[temps.len() - 1], temps[0]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if cv(a) > cv(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let t_peak = 0.5 * (lo + hi);
    let direct = -spectrum.thermal_energy(1.0 / t_peak) / 8.0;
    // The grid resolves T to its spacing, which maps onto ε through C_V.
    let resolution = cv(t_peak) * 0.12 / 8.0;
    let tol = resolution.hypot(scan.crossover.width);
    assert!(scan.crossover.energy_density > 0.0);
    assert!(
        (scan.crossover.energy_density - direct).abs() < tol,
        "{} vs {direct} (tol {tol})",
        scan.crossover.energy_density
    );
}

#[test]
fn unbracketed_peak_asks_for_a_wider_grid() {
    let temps: Vec<f64> = (0..10).map(|k| 0.1 + 0.01 * k as f64).rev().collect();
    let cfg = ThermalConfig::new(CouplingMatrix::from_fn(1, |_, _| 0.0).unwrap(), J0, J0, vec![1.0]).unwrap();
    let estimates = temps.iter().map(|t| exact_estimate(1.0 / t, -(1.0 / t).tanh())).collect();
    match assemble_scan(&cfg, estimates) {
        Err(Error::PeakNotBracketed { hint }) => assert!(hint.contains("smaller beta")),
        other => panic!("expected PeakNotBracketed, got {other:?}"),
    }
}

#[test]
fn rejects_bad_grids_and_couplings() {
    assert!(ThermalConfig::new(chain(4), B_Y, J0, vec![0.2, 0.1]).is_err());
    assert!(ThermalConfig::new(chain(4), B_Y, J0, vec![]).is_err());
    assert!(ThermalConfig::new(chain(4).scaled(-1.0), B_Y, J0, vec![0.1]).is_err());
}
