//! Two-step Floquet drive U_F = U₂U₁: a global π-pulse about ŷ followed by
//! Tukey-shaped mixed-field Ising evolution U₂ = exp(+i∫H dt).
//!
//! Pulses take no evolution time. The Ising envelope multiplies every term of
//! H, so for constant parameters the shaped evolution is exactly
//! exp(+i·(∫s)·H); noise only breaks this at its own resampling boundaries.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::noise::{modulate_parameters, NoiseTrajectory};
use crate::observables::{MeasurementPlan, ObservableSeries};
use crate::spinsim::{apply_single_site, hadamard_transform, HamiltonianSpec, KrylovOptions, Propagator, SpinState};

/// Default length of each sinusoidal ramp, seconds.
pub const DEFAULT_TUKEY_RAMP: f64 = 10e-6;
/// Nominal Rabi frequency for composite pulses; only sets the reported pulse duration.
pub const DEFAULT_PULSE_RABI: f64 = 2.0 * PI * 50e3;

type Mat2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseMode {
    /// Instantaneous single rotation exp(+i(π/2)σʸ) per site.
    Ideal,
    /// Four-rotation BB1 sequence, robust to Rabi amplitude errors.
    Bb1,
}

/// BB1 target angle and its correction phase φ = arccos(θ/4π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bb1Spec {
    pub theta: f64,
    pub phi: f64,
}

impl Bb1Spec {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=4.0 * PI).contains(&theta) {
            return Err(invalid("theta", "BB1 needs 0 <= theta <= 4*pi"));
        }
        Ok(Self {
            theta,
            phi: (theta / (4.0 * PI)).acos(),
        })
    }

    pub fn pi() -> Self {
        Self::new(PI).expect("pi is in range")
    }

    /// Single-spin operator with every rotation angle multiplied by `factor`.
    ///
    /// The correction axes sit in the xy-plane at angle φ from −ŷ, so φ is
    /// measured from the target rotation axis as the composite requires.
    pub fn matrix(&self, factor: f64) -> [[Complex64; 2]; 2] {
        let axis = |phase: f64| [phase.sin(), -phase.cos(), 0.0];
        let target = rotation([0.0, 1.0, 0.0], factor * self.theta);
        let outer = rotation(axis(self.phi), factor * PI);
        let inner = rotation(axis(3.0 * self.phi), factor * 2.0 * PI);
        mul(&outer, &mul(&inner, &mul(&outer, &target)))
    }
}

/// exp(−i(angle/2) n̂·σ⃗) for unit `axis`.
pub fn rotation(axis: [f64; 3], angle: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (angle / 2.0).sin_cos();
    let [x, y, z] = axis;
    [
        [Complex64::new(c, -s * z), Complex64::new(-s * y, -s * x)],
        [Complex64::new(s * y, -s * x), Complex64::new(c, s * z)],
    ]
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// The same operator expressed in the σˣ eigenbasis (|+⟩, |−⟩).
fn to_x_basis(u: &Mat2) -> Mat2 {
    let h = 1.0 / 2.0.sqrt();
    let had = [[Complex64::new(h, 0.0), Complex64::new(h, 0.0)], [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)]];
    mul(&had, &mul(u, &had))
}

/// Parameters of one drive period.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSchedule {
    ising: HamiltonianSpec,
    period: f64,
    pub pulse_mode: PulseMode,
    rabi_profile: Vec<f64>,
    tukey_ramp: f64,
    pub pulse_rabi: f64,
}

impl DriveSchedule {
    /// `ising` carries J, B_y and B_z; `period` is the Ising duration T in seconds.
    pub fn new(ising: HamiltonianSpec, period: f64) -> Result<Self> {
        let n = ising.n();
        let schedule = Self {
            ising,
            period,
            pulse_mode: PulseMode::Ideal,
            rabi_profile: alloc::vec![1.0; n],
            tukey_ramp: DEFAULT_TUKEY_RAMP,
            pulse_rabi: DEFAULT_PULSE_RABI,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Period from the drive frequency in units of `j0`: T = 2π/(ratio·J₀).
    pub fn from_frequency_ratio(ising: HamiltonianSpec, omega_over_j0: f64, j0: f64) -> Result<Self> {
        if !(omega_over_j0 > 0.0) || !(j0 > 0.0) {
            return Err(invalid("omega_over_j0", "frequency and j0 must be positive"));
        }
        Self::new(ising, 2.0 * PI / (omega_over_j0 * j0))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(invalid("period", "must be positive"));
        }
        if !(self.tukey_ramp >= 0.0) {
            return Err(invalid("tukey_ramp", "must be non-negative"));
        }
        if !(self.period > 2.0 * self.tukey_ramp) {
            return Err(invalid("tukey_ramp", "both ramps must fit inside the period"));
        }
        if self.rabi_profile.len() != self.ising.n() {
            return Err(invalid("rabi_profile", "need one factor per site"));
        }
        if self.rabi_profile.iter().any(|r| !(*r > 0.0)) {
            return Err(invalid("rabi_profile", "factors must be positive"));
        }
        if !(self.pulse_rabi > 0.0) {
            return Err(invalid("pulse_rabi", "must be positive"));
        }
        Ok(())
    }

    pub fn with_pulse_mode(mut self, mode: PulseMode) -> Self {
        self.pulse_mode = mode;
        self
    }

    pub fn with_tukey_ramp(mut self, ramp: f64) -> Result<Self> {
        self.tukey_ramp = ramp;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rabi_profile(mut self, profile: Vec<f64>) -> Result<Self> {
        self.rabi_profile = profile;
        self.validate()?;
        Ok(self)
    }

    pub fn ising(&self) -> &HamiltonianSpec {
        &self.ising
    }

    pub fn n(&self) -> usize {
        self.ising.n()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// ω = 2π/T.
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn b_y(&self) -> f64 {
        self.ising.b_y
    }

    pub fn b_z(&self) -> f64 {
        self.ising.b_z
    }

    pub fn tukey_ramp(&self) -> f64 {
        self.tukey_ramp
    }

    pub fn rabi_profile(&self) -> &[f64] {
        &self.rabi_profile
    }

    /// Duration a real BB1 π-pulse would take (five plain π-pulses).
    pub fn bb1_duration(&self) -> f64 {
        5.0 * PI / self.pulse_rabi
    }

    /// Peak rescale T/(T − r) that restores the unshaped area.
    pub fn area_scale(&self) -> f64 {
        self.period / (self.period - self.tukey_ramp)
    }

    /// Unscaled Tukey window at `t` ∈ [0, T].
    pub fn window(&self, t: f64) -> f64 {
        let (r, big_t) = (self.tukey_ramp, self.period);
        if r == 0.0 {
            return 1.0;
        }
        let edge = t.min(big_t - t);
        if edge >= r {
            1.0
        } else {
            (1.0 - (PI * edge.max(0.0) / r).cos()) / 2.0
        }
    }

    fn window_primitive(&self, t: f64) -> f64 {
        let (r, big_t) = (self.tukey_ramp, self.period);
        let rise = |u: f64| u / 2.0 - r / (2.0 * PI) * (PI * u / r).sin();
        if r == 0.0 {
            t
        } else if t <= r {
            rise(t)
        } else if t <= big_t - r {
            r / 2.0 + (t - r)
        } else {
            (big_t - r) - rise(big_t - t)
        }
    }

    /// ∫ₐᵇ of the rescaled envelope, so the full period integrates to T.
    pub fn envelope_area(&self, a: f64, b: f64) -> f64 {
        self.area_scale() * (self.window_primitive(b) - self.window_primitive(a))
    }
}

/// Noise for a segment: ε(start + t) for local time t.
#[derive(Debug, Clone, Copy)]
pub struct NoiseWindow<'a> {
    pub trajectory: &'a NoiseTrajectory,
    pub start: f64,
}

/// Reusable single-trajectory stepper holding the Krylov workspace.
#[derive(Debug, Clone)]
pub struct Driver {
    schedule: DriveSchedule,
    propagator: Propagator,
    /// Noiseless per-site pulse operators in the σˣ basis.
    pulse_x: Vec<Mat2>,
}

impl Driver {
    pub fn new(schedule: DriveSchedule) -> Self {
        Self::with_options(schedule, KrylovOptions::default())
    }

    pub fn with_options(schedule: DriveSchedule, options: KrylovOptions) -> Self {
        let pulse_x = pulse_matrices(&schedule, 1.0).iter().map(to_x_basis).collect();
        Self {
            schedule,
            propagator: Propagator::new(options),
            pulse_x,
        }
    }

    pub fn schedule(&self) -> &DriveSchedule {
        &self.schedule
    }

    pub fn matvecs(&self) -> u64 {
        self.propagator.matvecs()
    }

    /// U₁ only, in place.
    pub fn pulse(&mut self, state: &mut SpinState, noise: Option<NoiseWindow<'_>>) -> Result<()> {
        self.check(state)?;
        let amps = state.amplitudes_mut();
        hadamard_transform(amps);
        self.pulse_x_basis(amps, noise);
        hadamard_transform(amps);
        state.check_norm()
    }

    /// U₂ only, in place.
    pub fn segment(&mut self, state: &mut SpinState, noise: Option<NoiseWindow<'_>>) -> Result<()> {
        self.check(state)?;
        let amps = state.amplitudes_mut();
        hadamard_transform(amps);
        let result = self.segment_x_basis(amps, noise);
        hadamard_transform(amps);
        result?;
        state.check_norm()
    }

    /// U_F = U₂U₁ in place.
    pub fn period(&mut self, state: &mut SpinState, noise: Option<NoiseWindow<'_>>) -> Result<()> {
        self.check(state)?;
        let amps = state.amplitudes_mut();
        hadamard_transform(amps);
        self.pulse_x_basis(amps, noise);
        let result = self.segment_x_basis(amps, noise);
        hadamard_transform(amps);
        result?;
        state.check_norm()
    }

    /// Measures after every period, calling `hook` with each stroboscopic state.
    pub fn run(
        &mut self,
        initial: &SpinState,
        n_periods: usize,
        noise: Option<&NoiseTrajectory>,
        plan: &MeasurementPlan,
        mut hook: impl FnMut(usize, &SpinState) -> Result<()>,
    ) -> Result<ObservableSeries> {
        self.check(initial)?;
        if let Some(tr) = noise {
            if tr.duration() + 1e-12 * self.schedule.period < n_periods as f64 * self.schedule.period {
                return Err(invalid("noise", "trajectory shorter than the run"));
            }
        }
        let t_period = self.schedule.period;
        let mut state = initial.clone();
        let reference = plan.reported_sites(initial)?;
        let mut records = Vec::with_capacity(n_periods + 1);
        records.push(plan.measure(0, 0.0, &state, &reference)?);
        hook(0, &state)?;
        for k in 0..n_periods {
            let window = noise.map(|trajectory| NoiseWindow {
                trajectory,
                start: k as f64 * t_period,
            });
            self.period(&mut state, window)?;
            let n = k + 1;
            records.push(plan.measure(n, n as f64 * t_period, &state, &reference)?);
            hook(n, &state)?;
        }
        Ok(ObservableSeries {
            records,
            trajectories: 1,
        })
    }

    fn check(&self, state: &SpinState) -> Result<()> {
        if state.n() != self.schedule.n() {
            return Err(crate::Error::DimensionMismatch {
                expected: self.schedule.n(),
                actual: state.n(),
            });
        }
        Ok(())
    }

    fn pulse_x_basis(&self, amps: &mut [Complex64], noise: Option<NoiseWindow<'_>>) {
        // Noise reaches the pulse only when it has finite duration (BB1).
        let eps = match (self.schedule.pulse_mode, noise) {
            (PulseMode::Bb1, Some(w)) => w.trajectory.epsilon_at(w.start),
            _ => 0.0,
        };
        if eps == 0.0 {
            for (site, u) in self.pulse_x.iter().enumerate() {
                apply_single_site(amps, site, u);
            }
        } else {
            let factor = 1.0 + noise.map_or(0.0, |w| w.trajectory.model().by_factor) * eps;
            for (site, u) in pulse_matrices(&self.schedule, factor).iter().enumerate() {
                apply_single_site(amps, site, &to_x_basis(u));
            }
        }
    }

    fn segment_x_basis(&mut self, amps: &mut [Complex64], noise: Option<NoiseWindow<'_>>) -> Result<()> {
        let s = &self.schedule;
        let t_period = s.period;
        let Some(window) = noise else {
            return self.propagator.propagate_x_basis(amps, &s.ising, t_period);
        };
        // Merge runs of equal ε: they share one generator up to a scalar.
        let mut merged: Vec<(f64, f64, f64)> = Vec::new();
        for (a, b, eps) in window.trajectory.pieces(window.start, window.start + t_period) {
            let (a, b) = ((a - window.start).max(0.0), (b - window.start).min(t_period));
            match merged.last_mut() {
                Some(last) if last.2 == eps => last.1 = b,
                _ => merged.push((a, b, eps)),
            }
        }
        if merged.len() == 1 && merged[0].2 == 0.0 {
            return self.propagator.propagate_x_basis(amps, &s.ising, t_period);
        }
        let model = *window.trajectory.model();
        for (a, b, eps) in merged {
            let width = b - a;
            if width <= 0.0 {
                continue;
            }
            let spec = modulate_parameters(&s.ising, eps, &model).with_envelope(s.envelope_area(a, b) / width);
            self.propagator.propagate_x_basis(amps, &spec, width)?;
        }
        Ok(())
    }
}

/// Per-site single-spin pulse operators with angles scaled by `factor`.
fn pulse_matrices(schedule: &DriveSchedule, factor: f64) -> Vec<Mat2> {
    let bb1 = Bb1Spec::pi();
    schedule
        .rabi_profile
        .iter()
        .map(|r| match schedule.pulse_mode {
            // exp(+i(π/2)σʸ) is a rotation by −π.
            PulseMode::Ideal => rotation([0.0, 1.0, 0.0], -PI * r * factor),
            PulseMode::Bb1 => bb1.matrix(r * factor),
        })
        .collect()
}

/// U₁ applied to a copy of `state`.
pub fn global_pi_pulse(state: &SpinState, schedule: &DriveSchedule) -> Result<SpinState> {
    let mut out = state.clone();
    Driver::new(schedule.clone()).pulse(&mut out, None)?;
    Ok(out)
}

/// The BB1 sequence for `spec` with per-site angle factors `rabi_profile`.
pub fn bb1_unitary(state: &SpinState, spec: &Bb1Spec, rabi_profile: &[f64]) -> Result<SpinState> {
    if rabi_profile.len() != state.n() {
        return Err(invalid("rabi_profile", "need one factor per site"));
    }
    let mut out = state.clone();
    for (site, r) in rabi_profile.iter().enumerate() {
        apply_single_site(out.amplitudes_mut(), site, &spec.matrix(*r));
    }
    out.check_norm()?;
    Ok(out)
}

/// U₂ applied to a copy of `state`.
pub fn ising_segment(state: &SpinState, schedule: &DriveSchedule, noise: Option<NoiseWindow<'_>>) -> Result<SpinState> {
    let mut out = state.clone();
    Driver::new(schedule.clone()).segment(&mut out, noise)?;
    Ok(out)
}

/// U_F = U₂U₁ applied to a copy of `state`.
pub fn floquet_period(state: &SpinState, schedule: &DriveSchedule, noise: Option<NoiseWindow<'_>>) -> Result<SpinState> {
    let mut out = state.clone();
    Driver::new(schedule.clone()).period(&mut out, noise)?;
    Ok(out)
}

/// Stroboscopic run from `initial` for `n_periods`, one record per period.
pub fn run_stroboscopic(
    initial: &SpinState,
    schedule: &DriveSchedule,
    n_periods: usize,
    noise: Option<&NoiseTrajectory>,
    plan: &MeasurementPlan,
    hook: impl FnMut(usize, &SpinState) -> Result<()>,
) -> Result<ObservableSeries> {
    Driver::new(schedule.clone()).run(initial, n_periods, noise, plan, hook)
}

/// 1 − |tr(a†b)/2|² for single-spin operators; blind to global phase.
pub fn gate_infidelity(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> f64 {
    let tr = a[0][0].conj() * b[0][0] + a[0][1].conj() * b[0][1] + a[1][0].conj() * b[1][0] + a[1][1].conj() * b[1][1];
    1.0 - (tr / 2.0).norm_sqr()
}
