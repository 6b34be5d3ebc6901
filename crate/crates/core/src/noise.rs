//! Common-mode laser-power noise ε(t) and its action on the Hamiltonian:
//! B_y → B_y(1 + ε), B_z → B_z + ε·2π·8 kHz, J → J(1 + 2ε) by default.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::floquet::{DriveSchedule, Driver};
use crate::observables::{combine_series, MeasurementPlan, ObservableSeries};
use crate::spinsim::{HamiltonianSpec, SpinState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of ε.
    pub sigma: f64,
    /// Seconds between independent draws.
    pub resample_interval: f64,
    /// Angular frequency added to B_z per unit ε.
    pub bz_scale: f64,
    pub j_factor: f64,
    pub by_factor: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub const DEFAULT_BZ_SCALE: f64 = 2.0 * PI * 8e3;

    /// Default couplings with the resampling grid at `period / 20`.
    pub fn new(sigma: f64, period: f64, seed: u64) -> Result<Self> {
        let model = Self {
            sigma,
            resample_interval: period / 20.0,
            bz_scale: Self::DEFAULT_BZ_SCALE,
            j_factor: 2.0,
            by_factor: 1.0,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(invalid("sigma", "must be finite and non-negative"));
        }
        if !(self.resample_interval > 0.0) || !self.resample_interval.is_finite() {
            return Err(invalid("resample_interval", "must be positive"));
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.sigma == 0.0
    }
}

/// Piecewise-constant ε on a uniform grid starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrajectory {
    model: NoiseModel,
    samples: Vec<f64>,
}

impl NoiseTrajectory {
    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Seconds covered.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.model.resample_interval
    }

    fn slot(&self, t: f64) -> usize {
        let dt = self.model.resample_interval;
        let mut k = (t / dt).floor().max(0.0) as usize;
        // Times within round-off of a boundary belong to the later slot.
        if (k + 1) as f64 * dt - t < 1e-9 * dt {
            k += 1;
        }
        k.min(self.samples.len() - 1)
    }

    pub fn epsilon_at(&self, t: f64) -> f64 {
        self.samples[self.slot(t)]
    }

    /// Splits [t0, t1] at grid boundaries into (start, end, ε) pieces.
    pub fn pieces(&self, t0: f64, t1: f64) -> Vec<(f64, f64, f64)> {
        let dt = self.model.resample_interval;
        let mut out = Vec::new();
        let mut a = t0;
        let mut k = self.slot(t0);
        while a < t1 {
            let last = k + 1 >= self.samples.len();
            let b = if last { t1 } else { ((k + 1) as f64 * dt).min(t1) };
            if b > a {
                out.push((a, b, self.samples[k]));
                a = b;
            }
            if last {
                break;
            }
            k += 1;
        }
        out
    }

    /// Parameters at time `t`.
    pub fn modulate_at(&self, spec: &HamiltonianSpec, t: f64) -> HamiltonianSpec {
        modulate_parameters(spec, self.epsilon_at(t), &self.model)
    }
}

/// One Gaussian draw per interval from the ChaCha stream (seed, run_index).
pub fn sample_trajectory(model: &NoiseModel, duration: f64, run_index: u64) -> Result<NoiseTrajectory> {
    model.validate()?;
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(invalid("duration", "must be positive"));
    }
    let count = (duration / model.resample_interval).ceil().max(1.0) as usize;
    let samples = if model.is_silent() {
        alloc::vec![0.0; count]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(run_index);
        (0..count)
            .map(|_| model.sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    Ok(NoiseTrajectory {
        model: *model,
        samples,
    })
}

/// Returns a copy of `spec` with ε applied; couplings are shared, not copied.
pub fn modulate_parameters(spec: &HamiltonianSpec, eps: f64, model: &NoiseModel) -> HamiltonianSpec {
    if eps == 0.0 {
        return spec.clone();
    }
    let mut out = spec.with_fields(
        spec.b_y * (1.0 + model.by_factor * eps),
        spec.b_z + eps * model.bz_scale,
    );
    out.j_scale = spec.j_scale * (1.0 + model.j_factor * eps);
    out
}

/// One noisy trajectory; `model = None` or σ = 0 gives the noiseless run.
pub fn run_trajectory(
    schedule: &DriveSchedule,
    initial: &SpinState,
    model: Option<&NoiseModel>,
    run_index: u64,
    n_periods: usize,
    plan: &MeasurementPlan,
) -> Result<ObservableSeries> {
    let trajectory = match model {
        Some(m) if !m.is_silent() => Some(sample_trajectory(
            m,
            schedule.period() * n_periods.max(1) as f64,
            run_index,
        )?),
        _ => None,
    };
    let mut driver = Driver::new(schedule.clone());
    driver.run(initial, n_periods, trajectory.as_ref(), plan, |_, _| Ok(()))
}

/// Averages `n_trajectories` runs (run indices 0..n) with per-record sem.
pub fn ensemble_run(
    schedule: &DriveSchedule,
    initial: &SpinState,
    model: &NoiseModel,
    n_trajectories: usize,
    n_periods: usize,
    plan: &MeasurementPlan,
) -> Result<ObservableSeries> {
    if n_trajectories == 0 {
        return Err(invalid("n_trajectories", "must be at least 1"));
    }
    let runs = (0..n_trajectories as u64)
        .map(|k| run_trajectory(schedule, initial, Some(model), k, n_periods, plan))
        .collect::<Result<Vec<_>>>()?;
    combine_series(&runs)
}
