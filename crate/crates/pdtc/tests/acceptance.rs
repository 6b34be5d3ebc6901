//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and a
//! tally. Red criteria are reported, not hidden; set `PDTC_ACCEPTANCE_STRICT=1`
//! to turn any red line into a nonzero exit. `PDTC_ACCEPTANCE=3,7` runs a subset.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use pdtc::config::{Preset, RunConfig};
use pdtc::pipeline::{build_experiment, figure_config, run_scan, thread_pool, Experiment, ScanRun};
use pdtc_core::analysis::{fit_heating_time, prethermal_time, Timescale};
use pdtc_core::floquet::{gate_infidelity, rotation, Bb1Spec};
use pdtc_core::ionchain::{truncate_chain_at, CouplingMatrix};
use pdtc_core::qmc::{exact_spectrum, finite_difference_heat_capacity, thermal_energy, ThermalConfig};
use pdtc_core::spinsim::{dense_evolve_oracle, krylov_propagate, prepare_product_state, BlochAxis, HamiltonianSpec, SpinState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Verdict = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    run: fn(&rayon::ThreadPool) -> Verdict,
}

const fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn main() {
    let criteria = [
        Criterion { id: 1, title: "Krylov matches dense evolution", budget: minutes(1), run: krylov_oracle },
        Criterion { id: 2, title: "exact time crystal without fields", budget: minutes(1), run: exact_time_crystal },
        Criterion { id: 3, title: "prethermal equilibration time", budget: minutes(5), run: prethermal_equilibration },
        Criterion { id: 4, title: "tau* grows with drive frequency", budget: minutes(30), run: frequency_control },
        Criterion { id: 5, title: "trivial vs PDTC dichotomy", budget: minutes(30), run: dichotomy },
        Criterion { id: 6, title: "noise flattens frequency control", budget: minutes(120), run: noise_plateau },
        Criterion { id: 7, title: "QMC matches exact diagonalization", budget: minutes(10), run: qmc_exactness },
        Criterion { id: 8, title: "crossover energy density at N=25", budget: minutes(60), run: phase_boundary },
        Criterion { id: 9, title: "hardware calibration", budget: minutes(1), run: calibration },
        Criterion { id: 10, title: "BB1 robustness", budget: minutes(1), run: bb1_robustness },
    ];
    let selected: Option<Vec<u32>> = std::env::var("PDTC_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let strict = std::env::var("PDTC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let pool = thread_pool().expect("worker pool");

    let mut failed = Vec::new();
    let mut ran = 0;
    for c in criteria.iter().filter(|c| selected.as_ref().is_none_or(|s| s.contains(&c.id))) {
        ran += 1;
        let start = Instant::now();
        let verdict = (c.run)(&pool);
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let (pass, detail) = match verdict {
            Ok((ok, detail)) => (ok && in_budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget_note = if in_budget { String::new() } else { format!(", over the {:?} budget", c.budget) };
        println!(
            "criterion {:>2} {}: {} ({detail}) [{:.1} s{budget_note}]",
            c.id,
            c.title,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !pass {
            failed.push(c.id);
        }
    }
    println!("acceptance: {} of {ran} criteria pass; failing: {failed:?}", ran - failed.len());
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// The 25-ion experiment chain with a simulated block and scan axes.
fn chain_config(keep: usize, offset: usize) -> RunConfig {
    let mut c = RunConfig::default();
    c.trap.n_ions = 25;
    c.truncation.keep = Some(keep);
    c.truncation.offset = Some(offset);
    c
}

fn periods_for(duration_j0: f64, ratio: f64) -> usize {
    (duration_j0 * ratio / (2.0 * PI)).ceil() as usize
}

fn value(t: &Timescale) -> Option<f64> {
    t.value()
}

fn krylov_oracle(_: &rayon::ThreadPool) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8usize);
        let pairs: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..1.5)).collect();
        let j = CouplingMatrix::from_fn(n, |i, k| if i == k { 0.0 } else { pairs[i * n + k] }).map_err(err)?;
        let spec = HamiltonianSpec::new(j, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let amps = (0..1usize << n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let psi = SpinState::normalized(n, amps).map_err(err)?;
        let t = rng.random_range(0.0..10.0);
        let fast = krylov_propagate(&psi, &spec, t, 1e-11).map_err(err)?;
        let exact = dense_evolve_oracle(&psi, &spec, t).map_err(err)?;
        worst = worst.max(fast.distance(&exact));
    }
    Ok((worst < 1e-9, format!("worst distance {worst:.2e} over 100 instances")))
}

fn exact_time_crystal(pool: &rayon::ThreadPool) -> Verdict {
    let mut c = chain_config(10, 7);
    c.schedule.b_y_hz = 0.0;
    c.schedule.b_z_hz = 0.0;
    let exp = build_experiment(&c).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let axes: Vec<BlochAxis> = (0..exp.n())
            .map(|_| if rng.random_bool(0.5) { BlochAxis::PLUS_X } else { BlochAxis::MINUS_X })
            .collect();
        let psi = prepare_product_state(&axes).map_err(err)?;
        let series = exp.evolve(24.0, &psi, 500, pool).map_err(err)?;
        for r in &series.records {
            worst = worst.max((r.magnetization - r.parity.sign()).abs());
        }
    }
    Ok((worst < 1e-9, format!("max |M - (-1)^n| = {worst:.2e} over 4 states x 500 periods")))
}

fn prethermal_equilibration(pool: &rayon::ThreadPool) -> Verdict {
    let exp = build_experiment(&chain_config(12, 6)).map_err(err)?;
    let psi = exp.preset_state(Preset::CenterFlipped).map_err(err)?;
    let series = exp.evolve(38.0, &psi, periods_for(20.0, 38.0), pool).map_err(err)?;
    let tau = prethermal_time(&series, exp.config.analysis.prethermal_threshold).map_err(err)?;
    match value(&tau) {
        Some(t) => Ok(((1.5..=6.0).contains(&t), format!("J0 tau_pre = {t:.2}, window [1.5, 6]"))),
        None => Ok((false, "no homogenization within t J0 = 20".into())),
    }
}

/// Noiseless N=12 scan shared by criteria 4 and 5, on a common t J0 = 500 window.
fn noiseless_scan(pool: &rayon::ThreadPool) -> Result<Vec<ScanRun>, String> {
    use std::sync::OnceLock;
    static RUNS: OnceLock<Result<Vec<ScanRun>, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let mut c = figure_config("s2").map_err(err)?;
        c.scan.initial_states = vec![Preset::Polarized, Preset::Neel];
        c.scan.omega_over_j0 = vec![16.0, 24.0, 38.0];
        c.scan.duration_j0 = Some(500.0);
        let exp = build_experiment(&c).map_err(err)?;
        run_scan(&exp, pool).map_err(err)
    })
    .clone()
}

fn series_of(runs: &[ScanRun], state: Preset) -> Vec<&ScanRun> {
    runs.iter().filter(|r| r.state == state).collect()
}

fn strictly_increasing(v: &[Option<f64>]) -> bool {
    v.iter().all(Option::is_some) && v.windows(2).all(|w| w[1] > w[0])
}

fn fmt_values(v: &[Option<f64>]) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|x| x.map_or("undetermined".into(), |x| format!("{x:.3e}")))
        .collect();
    format!("[{}]", parts.join(", "))
}

fn frequency_control(pool: &rayon::ThreadPool) -> Verdict {
    let runs = noiseless_scan(pool)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for state in [Preset::Polarized, Preset::Neel] {
        let taus: Vec<Option<f64>> = series_of(&runs, state).iter().map(|r| r.summary.tau_star.value()).collect();
        ok &= strictly_increasing(&taus);
        detail.push(format!("{state} J0 tau* at w/J0 16,24,38 = {}", fmt_values(&taus)));
    }
    Ok((ok, detail.join("; ")))
}

fn dichotomy(pool: &rayon::ThreadPool) -> Verdict {
    let runs = noiseless_scan(pool)?;
    let neel = series_of(&runs, Preset::Neel);
    let pol = series_of(&runs, Preset::Polarized);
    let describe = |r: &ScanRun| match r.summary.tau_pdtc.value() {
        Some(v) => format!("{v:.3e}"),
        None => r.summary.tau_pdtc.message.clone().unwrap_or_else(|| r.summary.tau_pdtc.status.clone()),
    };

    let neel_pdtc: Vec<Option<f64>> = neel.iter().map(|r| r.summary.tau_pdtc.value()).collect();
    let neel_ok = match neel_pdtc.iter().copied().collect::<Option<Vec<f64>>>() {
        Some(v) => {
            let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
            let last = neel.last().expect("three frequencies");
            let flat = (hi - lo) / lo < 0.25;
            let short = last.summary.tau_star.value().is_some_and(|ts| v[v.len() - 1] < ts / 2.0);
            flat && short
        }
        None => false,
    };

    let pol_pdtc: Vec<Option<f64>> = pol.iter().map(|r| r.summary.tau_pdtc.value()).collect();
    let tracks = pol.iter().all(|r| match (r.summary.tau_pdtc.value(), r.summary.tau_star.value()) {
        (Some(p), Some(s)) => p / s <= 2.0 && s / p <= 2.0,
        _ => false,
    });
    let pol_ok = strictly_increasing(&pol_pdtc) && tracks;

    let neel_text: Vec<String> = neel.iter().map(|r| describe(r)).collect();
    let pol_text: Vec<String> = pol
        .iter()
        .map(|r| {
            let ratio = match (r.summary.tau_pdtc.value(), r.summary.tau_star.value()) {
                (Some(p), Some(s)) => format!(" (tau*/tau_pdtc {:.1})", s / p),
                _ => String::new(),
            };
            format!("{}{ratio}", describe(r))
        })
        .collect();
    Ok((
        neel_ok && pol_ok,
        format!(
            "neel J0 tau_pdtc = [{}] {}; polarized J0 tau_pdtc = [{}] {}",
            neel_text.join(", "),
            if neel_ok { "ok" } else { "fails" },
            pol_text.join(", "),
            if pol_ok { "ok" } else { "fails" }
        ),
    ))
}

fn noise_plateau(pool: &rayon::ThreadPool) -> Verdict {
    const WINDOW: f64 = 100.0;
    let ratios = [24.0, 38.0, 60.0];
    let tau_star = |exp: &Experiment, state: Preset| -> Result<Vec<Option<f64>>, String> {
        let psi = exp.preset_state(state).map_err(err)?;
        ratios
            .iter()
            .map(|&w| {
                let series = exp.evolve(w, &psi, periods_for(WINDOW, w), pool).map_err(err)?;
                Ok(fit_heating_time(&series).ok().and_then(|f| f.timescale.value()))
            })
            .collect()
    };
    let quiet = build_experiment(&chain_config(10, 7)).map_err(err)?;
    let mut noisy_cfg = chain_config(10, 7);
    noisy_cfg.noise.sigma = 0.1;
    noisy_cfg.noise.trajectories = 50;
    let noisy = build_experiment(&noisy_cfg).map_err(err)?;

    let mut ok = true;
    let mut detail = Vec::new();
    for state in [Preset::Polarized, Preset::Neel] {
        let q = tau_star(&quiet, state)?;
        let z = tau_star(&noisy, state)?;
        // An undetermined noiseless τ* means no visible heating: an unbounded ratio.
        let ratio = |v: &[Option<f64>]| match (v[1], v[2]) {
            (Some(a), Some(b)) => Some(b / a),
            (Some(_), None) => Some(f64::INFINITY),
            _ => None,
        };
        let (rq, rz) = (ratio(&q), ratio(&z));
        ok &= matches!((rq, rz), (Some(a), Some(b)) if b < a);
        detail.push(format!(
            "{state}: tau*(60)/tau*(38) noisy {} vs noiseless {}; noisy J0 tau* {}",
            rz.map_or("n/a".into(), |r| format!("{r:.2}")),
            rq.map_or("n/a".into(), |r| format!("{r:.3e}")),
            fmt_values(&z)
        ));
    }
    Ok((ok, format!("window t J0 <= {WINDOW}; {}", detail.join("; "))))
}

fn qmc_exactness(pool: &rayon::ThreadPool) -> Verdict {
    let exp = build_experiment(&chain_config(25, 0)).map_err(err)?;
    let q = &exp.config.qmc;
    // 25 − 8 is odd, so the block sits one site left of centre.
    let block = truncate_chain_at(&exp.chain.couplings, 8, 8).map_err(err)?;
    let mut cfg = ThermalConfig::new(block, 2.0 * PI * exp.config.schedule.b_y_hz, exp.j0, q.beta_grid()).map_err(err)?;
    cfg.sweeps = 100_000;
    cfg.thermalization = 5_000;
    cfg.dtau = q.dtau;
    cfg.seed = 8;
    let spectrum = exact_spectrum(&cfg).map_err(err)?;
    let estimates: Vec<_> = pool.install(|| {
        cfg.betas
            .par_iter()
            .enumerate()
            .map(|(k, b)| thermal_energy(&cfg, *b, k as u64))
            .collect::<Vec<_>>()
    });
    let estimates = estimates.into_iter().collect::<Result<Vec<_>, _>>().map_err(err)?;
    let energies: Vec<f64> = estimates.iter().map(|e| e.energy).collect();
    let errors: Vec<f64> = estimates.iter().map(|e| e.energy_error).collect();
    let cv = finite_difference_heat_capacity(&cfg.betas, &energies, &errors).map_err(err)?;

    let (mut worst_e, mut worst_c) = (0.0f64, 0.0f64);
    for (k, &beta) in cfg.betas.iter().enumerate() {
        let pull_e = (energies[k] - spectrum.thermal_energy(beta)).abs() / errors[k];
        let pull_c = (cv[k].0 - spectrum.heat_capacity(beta)).abs() / cv[k].1;
        worst_e = worst_e.max(pull_e);
        worst_c = worst_c.max(pull_c);
    }
    Ok((
        worst_e < 3.0 && worst_c < 3.0,
        format!(
            "{} grid points, worst |E - E_ED| = {worst_e:.2} sigma, worst |C_V - C_V,ED| = {worst_c:.2} sigma",
            cfg.betas.len()
        ),
    ))
}

fn phase_boundary(pool: &rayon::ThreadPool) -> Verdict {
    let exp = build_experiment(&figure_config("s6").map_err(err)?).map_err(err)?;
    let scan = exp.run_qmc(pool).map_err(err)?;
    let x = scan.crossover;
    Ok((
        (1.58..=2.78).contains(&x.energy_density),
        format!(
            "eps_crit/J0 = {:.3} +/- {:.3} at T = {:.3} J0, window [1.58, 2.78]",
            x.energy_density, x.width, x.temperature
        ),
    ))
}

fn calibration(_: &rayon::ThreadPool) -> Verdict {
    let exp = build_experiment(&chain_config(25, 0)).map_err(err)?;
    let nn = exp.chain.couplings.distance_profile()[0].mean;
    let rel = (nn / (2.0 * PI * 330.0) - 1.0).abs();
    let flip = exp.spin_flip_probability().map_err(err)?;
    let flip_ok = (0.007 / 1.5..=0.007 * 1.5).contains(&flip);
    Ok((
        rel < 1e-12 && flip_ok,
        format!("NN mean off by {rel:.1e} relative, spin-flip {:.3}% per spin", 100.0 * flip),
    ))
}

fn bb1_robustness(_: &rayon::ThreadPool) -> Verdict {
    let spec = Bb1Spec::pi();
    let target = rotation([0.0, 1.0, 0.0], PI);
    let mut worst_gain = f64::INFINITY;
    for eps in [0.05, -0.05] {
        let plain = gate_infidelity(&target, &rotation([0.0, 1.0, 0.0], PI * (1.0 + eps)));
        let composite = gate_infidelity(&target, &spec.matrix(1.0 + eps));
        worst_gain = worst_gain.min(plain / composite);
    }
    Ok((worst_gain >= 100.0, format!("plain/BB1 infidelity ratio {worst_gain:.0}")))
}
