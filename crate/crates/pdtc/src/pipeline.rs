//! Builds core objects from a resolved [`RunConfig`] and runs them, fanning
//! independent trajectories and β points out over a rayon pool. Results are
//! always gathered in index order, so output does not depend on thread count.

use std::f64::consts::PI;

use pdtc_core::analysis::{
    central_pair, fit_heating_time, fit_pdtc_lifetime, pdtc_window_sensitivity, prethermal_time, DecayFit, Timescale,
};
use pdtc_core::floquet::{DriveSchedule, PulseMode};
use pdtc_core::ionchain::{mean_spin_flip_probability, truncate_chain_at, ChainModel, CouplingMatrix, RamanConfig, TrapConfig};
use pdtc_core::noise::{run_trajectory, NoiseModel};
use pdtc_core::observables::{combine_series, MeasurementPlan, ObservableSeries};
use pdtc_core::qmc::{assemble_scan, thermal_energy, ThermalConfig, ThermalScan};
use pdtc_core::spinsim::{prepare_product_state, BlochAxis, HamiltonianSpec, SpinState};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{substream, validate_config, Preset, PulseKind, RunConfig};
use crate::error::AppError;

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "PDTC_THREADS";

pub fn thread_pool() -> Result<rayon::ThreadPool, AppError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => return Err(AppError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AppError::Usage(format!("cannot start worker pool: {e}")))
}

/// A calibrated chain and the block of it being simulated.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub chain: ChainModel,
    /// Couplings of the simulated block, rad/s.
    pub couplings: CouplingMatrix,
    /// Full-chain J₀, rad/s; every ω/J₀ and t·J₀ refers to it.
    pub j0: f64,
}

pub fn build_chain(config: &RunConfig) -> Result<ChainModel, AppError> {
    let trap = TrapConfig::new(config.trap.n_ions, config.trap.f_com_hz, config.trap.f_z_hz)?;
    let raman = RamanConfig {
        detuning: 2.0 * PI * (config.trap.f_com_hz + config.raman.detuning_above_com_hz),
        ..RamanConfig::experiment_defaults(&trap)
    };
    Ok(ChainModel::calibrated(trap, raman, 2.0 * PI * config.raman.j0_hz)?)
}

/// Validates `config` and builds the chain it describes.
pub fn build_experiment(config: &RunConfig) -> Result<Experiment, AppError> {
    let config = validate_config(config)?;
    let chain = build_chain(&config)?;
    let keep = config.truncation.keep.expect("resolved");
    let offset = config.truncation.offset.expect("resolved");
    let couplings = truncate_chain_at(&chain.couplings, keep, offset)?;
    Ok(Experiment {
        j0: 2.0 * PI * config.raman.j0_hz,
        config,
        chain,
        couplings,
    })
}

impl Experiment {
    pub fn n(&self) -> usize {
        self.couplings.n()
    }

    /// Ising-segment Hamiltonian with the configured B_y and B_z.
    pub fn ising(&self) -> HamiltonianSpec {
        let s = &self.config.schedule;
        HamiltonianSpec::new(self.couplings.clone(), 2.0 * PI * s.b_y_hz, 2.0 * PI * s.b_z_hz)
    }

    /// H_eff used for the energy density: same J and B_y, no B_z.
    pub fn h_eff(&self) -> HamiltonianSpec {
        let spec = self.ising();
        spec.with_fields(spec.b_y, 0.0)
    }

    pub fn schedule(&self, omega_over_j0: f64) -> Result<DriveSchedule, AppError> {
        let s = &self.config.schedule;
        let mut schedule = DriveSchedule::from_frequency_ratio(self.ising(), omega_over_j0, self.j0)?
            .with_tukey_ramp(s.tukey_ramp_s)?
            .with_pulse_mode(match s.pulse {
                PulseKind::Ideal => PulseMode::Ideal,
                PulseKind::Bb1 => PulseMode::Bb1,
            });
        schedule.pulse_rabi = 2.0 * PI * s.pulse_rabi_hz;
        if let Some(p) = &s.rabi_profile {
            schedule = schedule.with_rabi_profile(p.clone())?;
        }
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn plan(&self) -> Result<MeasurementPlan, AppError> {
        Ok(MeasurementPlan::new(Some(self.h_eff()), self.j0)?)
    }

    pub fn noise_model(&self, omega_over_j0: f64) -> Result<Option<NoiseModel>, AppError> {
        let nz = &self.config.noise;
        if nz.sigma == 0.0 {
            return Ok(None);
        }
        let period = 2.0 * PI / (omega_over_j0 * self.j0);
        let model = NoiseModel {
            sigma: nz.sigma,
            resample_interval: period / nz.draws_per_period as f64,
            bz_scale: 2.0 * PI * nz.bz_scale_hz,
            j_factor: nz.j_factor,
            by_factor: nz.by_factor,
            seed: substream(self.config.seed, "noise"),
        };
        model.validate()?;
        Ok(Some(model))
    }

    /// Product state for `preset` on the simulated block.
    pub fn preset_state(&self, preset: Preset) -> Result<SpinState, AppError> {
        Ok(prepare_product_state(&preset_axes(preset, self.n()))?)
    }

    /// The configured initial state: explicit axes when given, else the preset.
    pub fn initial_state(&self) -> Result<SpinState, AppError> {
        match &self.config.initial.axes {
            Some(axes) => {
                let axes: Vec<BlochAxis> = axes
                    .iter()
                    .map(|a| {
                        let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
                        BlochAxis::new(a[0] / n, a[1] / n, a[2] / n)
                    })
                    .collect();
                Ok(prepare_product_state(&axes)?)
            }
            None => self.preset_state(self.config.initial.preset),
        }
    }

    /// Noiseless run, or the trajectory average when σ > 0.
    pub fn evolve(
        &self,
        omega_over_j0: f64,
        initial: &SpinState,
        periods: usize,
        pool: &rayon::ThreadPool,
    ) -> Result<ObservableSeries, AppError> {
        let schedule = self.schedule(omega_over_j0)?;
        let plan = self.plan()?;
        let model = self.noise_model(omega_over_j0)?;
        let Some(model) = model else {
            return Ok(run_trajectory(&schedule, initial, None, 0, periods, &plan)?);
        };
        let runs: Vec<_> = pool.install(|| {
            (0..self.config.noise.trajectories as u64)
                .into_par_iter()
                .map(|k| run_trajectory(&schedule, initial, Some(&model), k, periods, &plan))
                .collect()
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(combine_series(&runs)?)
    }

    /// QMC settings for the configured block of the full chain.
    pub fn thermal_config(&self) -> Result<ThermalConfig, AppError> {
        let q = &self.config.qmc;
        let n = self.chain.couplings.n();
        let keep = q.keep.unwrap_or(n);
        let couplings = truncate_chain_at(&self.chain.couplings, keep, (n - keep) / 2)?;
        let mut cfg = ThermalConfig::new(
            couplings,
            (2.0 * PI * self.config.schedule.b_y_hz).abs(),
            self.j0,
            q.beta_grid(),
        )?;
        cfg.sweeps = q.sweeps;
        cfg.thermalization = q.thermalization;
        cfg.measure_every = q.measure_every;
        cfg.dtau = q.dtau;
        cfg.seed = substream(self.config.seed, "qmc");
        cfg.validate()?;
        Ok(cfg)
    }

    /// One independent chain per β on stream = grid index.
    pub fn run_qmc(&self, pool: &rayon::ThreadPool) -> Result<ThermalScan, AppError> {
        let cfg = self.thermal_config()?;
        let estimates: Vec<_> = pool.install(|| {
            cfg.betas
                .par_iter()
                .enumerate()
                .map(|(k, b)| thermal_energy(&cfg, *b, k as u64))
                .collect()
        });
        let estimates = estimates.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(assemble_scan(&cfg, estimates)?)
    }

    /// Mean per-ion off-resonant spin-flip probability of the full chain.
    pub fn spin_flip_probability(&self) -> Result<f64, AppError> {
        Ok(mean_spin_flip_probability(&self.chain.modes, &self.chain.raman)?)
    }
}

pub fn preset_axes(preset: Preset, n: usize) -> Vec<BlochAxis> {
    match preset {
        Preset::Polarized => vec![BlochAxis::PLUS_X; n],
        Preset::Neel => (0..n)
            .map(|i| if i % 2 == 0 { BlochAxis::PLUS_X } else { BlochAxis::MINUS_X })
            .collect(),
        Preset::CenterFlipped => {
            let (a, b) = central_pair(n);
            (0..n)
                .map(|i| if i == a || i == b { BlochAxis::PLUS_Z } else { BlochAxis::PLUS_X })
                .collect()
        }
    }
}

/// Serializable outcome of one timescale extraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimescaleReport {
    /// `ok`, `undetermined` or `error`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[usize; 2]>,
    pub truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl TimescaleReport {
    pub fn value(&self) -> Option<f64> {
        self.value
    }

    fn from_timescale(t: Timescale) -> Self {
        match t {
            Timescale::Finite { value, error } => Self {
                status: "ok".into(),
                value: Some(value),
                error: Some(error),
                window: None,
                truncated: false,
                message: None,
            },
            Timescale::Undetermined => Self::undetermined(),
        }
    }

    fn undetermined() -> Self {
        Self {
            status: "undetermined".into(),
            value: None,
            error: None,
            window: None,
            truncated: false,
            message: None,
        }
    }

    fn from_decay(fit: Result<DecayFit, pdtc_core::Error>) -> Self {
        match fit {
            Ok(f) => Self {
                window: Some([f.window.0, f.window.1]),
                truncated: f.truncated,
                ..Self::from_timescale(f.timescale)
            },
            Err(e) => Self {
                status: "error".into(),
                message: Some(e.to_string()),
                ..Self::undetermined()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub records: usize,
    pub trajectories: usize,
    pub tau_star: TimescaleReport,
    pub tau_pdtc: TimescaleReport,
    pub tau_pre: TimescaleReport,
    /// τ_PDTC for each alternative window start.
    pub pdtc_sensitivity: Vec<(usize, TimescaleReport)>,
}

/// τ*, τ_PDTC (with window sensitivity) and τ_pre, all in 1/J₀.
pub fn fit_summary(series: &ObservableSeries, config: &RunConfig) -> FitSummary {
    let a = &config.analysis;
    let tau_pre = match prethermal_time(series, a.prethermal_threshold) {
        Ok(t) => TimescaleReport::from_timescale(t),
        Err(e) => TimescaleReport {
            status: "error".into(),
            message: Some(e.to_string()),
            ..TimescaleReport::undetermined()
        },
    };
    FitSummary {
        records: series.len(),
        trajectories: series.trajectories,
        tau_star: TimescaleReport::from_decay(fit_heating_time(series)),
        tau_pdtc: TimescaleReport::from_decay(fit_pdtc_lifetime(series, a.pdtc_n_min)),
        tau_pre,
        pdtc_sensitivity: pdtc_window_sensitivity(series, &a.sensitivity_starts)
            .into_iter()
            .map(|(n, f)| (n, TimescaleReport::from_decay(f)))
            .collect(),
    }
}

/// One cell of a frequency × initial-state scan.
#[derive(Debug, Clone)]
pub struct ScanRun {
    pub omega_over_j0: f64,
    pub state: Preset,
    pub series: ObservableSeries,
    pub summary: FitSummary,
}

pub fn run_scan(exp: &Experiment, pool: &rayon::ThreadPool) -> Result<Vec<ScanRun>, AppError> {
    let scan = &exp.config.scan;
    let mut out = Vec::new();
    for state in &scan.initial_states {
        let initial = exp.preset_state(*state)?;
        for ratio in &scan.omega_over_j0 {
            let periods = scan.periods_at(*ratio, exp.config.schedule.periods);
            let series = exp.evolve(*ratio, &initial, periods, pool)?;
            let summary = fit_summary(&series, &exp.config);
            out.push(ScanRun {
                omega_over_j0: *ratio,
                state: *state,
                series,
                summary,
            });
        }
    }
    Ok(out)
}

pub const SCAN_HEADER: [&str; 9] = [
    "state",
    "omega_over_j0",
    "tau_star",
    "tau_star_err",
    "tau_pdtc",
    "tau_pdtc_err",
    "tau_pre",
    "tau_pre_err",
    "trajectories",
];

pub fn scan_rows(runs: &[ScanRun]) -> Vec<Vec<String>> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    runs.iter()
        .map(|r| {
            let s = &r.summary;
            vec![
                r.state.to_string(),
                format!("{}", r.omega_over_j0),
                opt(s.tau_star.value),
                opt(s.tau_star.error),
                opt(s.tau_pdtc.value),
                opt(s.tau_pdtc.error),
                opt(s.tau_pre.value),
                opt(s.tau_pre.error),
                format!("{}", s.trajectories),
            ]
        })
        .collect()
}

pub const QMC_HEADER: [&str; 10] = [
    "beta", "T", "E", "E_err", "C_V", "C_V_err", "abs_mx", "abs_mx_err", "slices", "poorly_decorrelated",
];

pub fn qmc_rows(scan: &ThermalScan) -> Vec<Vec<String>> {
    scan.points
        .iter()
        .map(|p| {
            let e = &p.estimate;
            vec![
                format!("{}", e.beta),
                format!("{}", 1.0 / e.beta),
                format!("{}", e.energy),
                format!("{}", e.energy_error),
                format!("{}", p.heat_capacity),
                format!("{}", p.heat_capacity_error),
                format!("{}", e.abs_magnetization),
                format!("{}", e.abs_magnetization_error),
                format!("{}", e.slices),
                format!("{}", e.poorly_decorrelated),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverSummary {
    pub n: usize,
    /// ⟨H_eff⟩/(N·J₀) at the C_V peak.
    pub energy_density: f64,
    pub width: f64,
    pub temperature_j0: f64,
    pub temperature_error_j0: f64,
    pub peak_hwhm_j0: f64,
    pub flagged_points: usize,
}

pub fn crossover_summary(scan: &ThermalScan) -> CrossoverSummary {
    CrossoverSummary {
        n: scan.n,
        energy_density: scan.crossover.energy_density,
        width: scan.crossover.width,
        temperature_j0: scan.crossover.temperature,
        temperature_error_j0: scan.peak.center_error,
        peak_hwhm_j0: scan.peak.hwhm,
        flagged_points: scan.points.iter().filter(|p| p.estimate.poorly_decorrelated).count(),
    }
}

/// Canned desk-scale configurations for the supplementary figures.
pub fn figure_config(id: &str) -> Result<RunConfig, AppError> {
    let mut c = RunConfig {
        name: id.to_string(),
        output_dir: format!("out/{id}").into(),
        ..RunConfig::default()
    };
    c.trap.n_ions = 25;
    let dynamics = |c: &mut RunConfig, keep: usize, states: Vec<Preset>, ratios: Vec<f64>| {
        c.truncation.keep = Some(keep);
        c.truncation.offset = Some((25 - keep) / 2);
        c.scan.initial_states = states;
        c.scan.omega_over_j0 = ratios;
    };
    match id {
        "s1" => {}
        "s2" => {
            dynamics(&mut c, 12, vec![Preset::Polarized], vec![16.0, 24.0, 38.0]);
            c.scan.duration_j0 = Some(500.0);
        }
        "s3" => {
            dynamics(&mut c, 12, vec![Preset::Neel], vec![16.0, 24.0, 38.0]);
            c.scan.duration_j0 = Some(500.0);
        }
        "s4" | "s5" => {
            let state = if id == "s4" { Preset::Polarized } else { Preset::Neel };
            dynamics(&mut c, 10, vec![state], vec![24.0, 38.0, 60.0]);
            c.scan.duration_j0 = Some(100.0);
            c.noise.sigma = 0.1;
            c.noise.trajectories = 20;
        }
        "s6" => {
            c.qmc.t_min = 1.5;
            c.qmc.t_max = 8.0;
            c.qmc.points = 24;
            c.qmc.sweeps = 50_000;
            c.qmc.thermalization = 5_000;
        }
        other => return Err(AppError::Usage(format!("unknown figure `{other}` (s1, s2, s3, s4, s5, s6)"))),
    }
    Ok(c)
}
