//! Run configuration in TOML. Every section has defaults, so an empty file is
//! a valid four-ion smoke run; [`validate_config`] resolves derived fields and
//! reports every violation at once.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// Root of every random stream in the run.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub trap: TrapSection,
    pub raman: RamanSection,
    pub truncation: TruncationSection,
    pub schedule: ScheduleSection,
    pub initial: InitialSection,
    pub noise: NoiseSection,
    pub scan: ScanSection,
    pub analysis: AnalysisSection,
    pub qmc: QmcSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "smoke".into(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            trap: TrapSection::default(),
            raman: RamanSection::default(),
            truncation: TruncationSection::default(),
            schedule: ScheduleSection::default(),
            initial: InitialSection::default(),
            noise: NoiseSection::default(),
            scan: ScanSection::default(),
            analysis: AnalysisSection::default(),
            qmc: QmcSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapSection {
    pub n_ions: usize,
    pub f_com_hz: f64,
    pub f_z_hz: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            n_ions: 4,
            f_com_hz: 4.67e6,
            f_z_hz: 0.34e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamanSection {
    /// μ/2π − f_COM.
    pub detuning_above_com_hz: f64,
    /// Calibration target for the mean nearest-neighbour coupling.
    pub j0_hz: f64,
}

impl Default for RamanSection {
    fn default() -> Self {
        Self {
            detuning_above_com_hz: 100e3,
            j0_hz: 330.0,
        }
    }
}

/// Which block of the chain is simulated. Couplings keep the full-chain J₀.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSection {
    /// Spins kept; the whole chain when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keep: Option<usize>,
    /// First kept ion; centred when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    Ideal,
    Bb1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub b_y_hz: f64,
    pub b_z_hz: f64,
    /// ω/J₀ for `evolve`.
    pub omega_over_j0: f64,
    pub periods: usize,
    pub tukey_ramp_s: f64,
    pub pulse: PulseKind,
    pub pulse_rabi_hz: f64,
    /// Per-site Rabi factors; uniform when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi_profile: Option<Vec<f64>>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            b_y_hz: 500.0,
            b_z_hz: 200.0,
            omega_over_j0: 24.0,
            periods: 20,
            tukey_ramp_s: 10e-6,
            pulse: PulseKind::Ideal,
            pulse_rabi_hz: 50e3,
            rabi_profile: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Polarized,
    Neel,
    CenterFlipped,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Polarized => "polarized",
            Preset::Neel => "neel",
            Preset::CenterFlipped => "center_flipped",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "polarized" => Ok(Preset::Polarized),
            "neel" => Ok(Preset::Neel),
            "center_flipped" => Ok(Preset::CenterFlipped),
            other => Err(format!("unknown initial state `{other}` (polarized, neel, center_flipped)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub preset: Preset,
    /// Explicit Bloch vectors, one per simulated spin; overrides `preset`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<[f64; 3]>>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            preset: Preset::Polarized,
            axes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma: f64,
    /// Independent draws per drive period.
    pub draws_per_period: usize,
    pub trajectories: usize,
    pub bz_scale_hz: f64,
    pub j_factor: f64,
    pub by_factor: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            draws_per_period: 20,
            trajectories: 1,
            bz_scale_hz: 8e3,
            j_factor: 2.0,
            by_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub omega_over_j0: Vec<f64>,
    pub initial_states: Vec<Preset>,
    /// Common run length in t·J₀; `schedule.periods` is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_j0: Option<f64>,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            omega_over_j0: vec![16.0, 24.0, 38.0],
            initial_states: vec![Preset::Polarized, Preset::Neel],
            duration_j0: None,
        }
    }
}

impl ScanSection {
    /// Periods run at drive frequency `ratio`.
    pub fn periods_at(&self, ratio: f64, fallback: usize) -> usize {
        match self.duration_j0 {
            Some(d) => (d * ratio / (2.0 * std::f64::consts::PI)).ceil().max(1.0) as usize,
            None => fallback,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub pdtc_n_min: usize,
    pub prethermal_threshold: f64,
    /// Window starts reported alongside τ_PDTC.
    pub sensitivity_starts: Vec<usize>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            pdtc_n_min: 2,
            prethermal_threshold: 0.1,
            sensitivity_starts: vec![1, 2, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmcSection {
    /// Spins kept for the thermal scan; the whole chain when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keep: Option<usize>,
    /// Temperature grid in J₀ units, used when `betas` is absent.
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    pub sweeps: usize,
    pub thermalization: usize,
    pub measure_every: usize,
    pub dtau: f64,
}

impl Default for QmcSection {
    fn default() -> Self {
        Self {
            keep: None,
            t_min: 0.5,
            t_max: 4.0,
            points: 24,
            betas: None,
            sweeps: 20_000,
            thermalization: 2_000,
            measure_every: 1,
            dtau: 0.0125,
        }
    }
}

impl QmcSection {
    /// The β grid in ascending order.
    pub fn beta_grid(&self) -> Vec<f64> {
        if let Some(b) = &self.betas {
            return b.clone();
        }
        let n = self.points.max(2);
        let mut betas: Vec<f64> = (0..n)
            .map(|k| 1.0 / (self.t_min + (self.t_max - self.t_min) * k as f64 / (n - 1) as f64))
            .collect();
        betas.reverse();
        betas
    }
}

/// One violated constraint, addressed by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfigErrors(pub Vec<FieldError>);

impl ConfigErrors {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn fields(&self) -> Vec<&str> {
        self.0.iter().map(|e| e.field.as_str()).collect()
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

pub fn parse_config(text: &str) -> Result<RunConfig, AppError> {
    toml::from_str(text).map_err(|e| AppError::Parse(e.to_string()))
}

pub fn to_toml(config: &RunConfig) -> String {
    toml::to_string(config).expect("configuration always serializes")
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_config(&text)
}

/// Largest simulated chain; the state vector of 2^26 amplitudes is 1 GiB.
pub const MAX_SIMULATED_SPINS: usize = 26;

fn finite_positive(errs: &mut ConfigErrors, field: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errs.push(field, format!("must be positive and finite, got {v}"));
    }
}

fn finite_non_negative(errs: &mut ConfigErrors, field: &str, v: f64) {
    if !(v >= 0.0 && v.is_finite()) {
        errs.push(field, format!("must be non-negative and finite, got {v}"));
    }
}

/// Checks every cross-field constraint and fills in derived defaults
/// (truncation keep/offset and the explicit β grid).
pub fn validate_config(config: &RunConfig) -> Result<RunConfig, ConfigErrors> {
    let mut errs = ConfigErrors::default();
    let mut out = config.clone();
    let n = config.trap.n_ions;

    if n < 2 {
        errs.push("trap.n_ions", "a chain needs at least 2 ions");
    }
    finite_positive(&mut errs, "trap.f_com_hz", config.trap.f_com_hz);
    finite_positive(&mut errs, "trap.f_z_hz", config.trap.f_z_hz);
    if config.trap.f_z_hz >= config.trap.f_com_hz {
        errs.push("trap.f_z_hz", "axial confinement must be weaker than transverse");
    }
    if !(config.raman.detuning_above_com_hz > 0.0 && config.raman.detuning_above_com_hz.is_finite()) {
        errs.push("raman.detuning_above_com_hz", "the beatnote must sit above the COM mode");
    }
    finite_positive(&mut errs, "raman.j0_hz", config.raman.j0_hz);

    let keep = config.truncation.keep.unwrap_or(n);
    if keep == 0 || keep > n {
        errs.push("truncation.keep", format!("must lie in 1..={n}, got {keep}"));
    } else if keep > MAX_SIMULATED_SPINS {
        errs.push("truncation.keep", format!("at most {MAX_SIMULATED_SPINS} spins can be simulated"));
    }
    let offset = match config.truncation.offset {
        Some(o) => o,
        None if keep <= n && (n - keep) % 2 == 1 => {
            errs.push("truncation.offset", "N − keep is odd, so the block cannot be centred; give an offset");
            0
        }
        None => (n.saturating_sub(keep)) / 2,
    };
    if keep <= n && offset + keep > n {
        errs.push("truncation.offset", format!("offset {offset} + keep {keep} exceeds {n} ions"));
    }
    out.truncation = TruncationSection {
        keep: Some(keep),
        offset: Some(offset),
    };

    let s = &config.schedule;
    finite_non_negative(&mut errs, "schedule.b_y_hz", s.b_y_hz.abs());
    finite_non_negative(&mut errs, "schedule.b_z_hz", s.b_z_hz.abs());
    finite_positive(&mut errs, "schedule.omega_over_j0", s.omega_over_j0);
    finite_non_negative(&mut errs, "schedule.tukey_ramp_s", s.tukey_ramp_s);
    finite_positive(&mut errs, "schedule.pulse_rabi_hz", s.pulse_rabi_hz);
    if s.periods == 0 {
        errs.push("schedule.periods", "must be at least 1");
    }
    let period_of = |ratio: f64| 1.0 / (ratio * config.raman.j0_hz);
    if s.omega_over_j0 > 0.0 && config.raman.j0_hz > 0.0 && !(period_of(s.omega_over_j0) > 2.0 * s.tukey_ramp_s) {
        errs.push(
            "schedule.tukey_ramp_s",
            format!(
                "ramp {} s does not fit twice into the period {} s",
                s.tukey_ramp_s,
                period_of(s.omega_over_j0)
            ),
        );
    }
    if let Some(p) = &s.rabi_profile {
        if p.len() != keep {
            errs.push("schedule.rabi_profile", format!("need {keep} factors, got {}", p.len()));
        }
        if p.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            errs.push("schedule.rabi_profile", "factors must be positive");
        }
    }

    if let Some(axes) = &config.initial.axes {
        if axes.len() != keep {
            errs.push("initial.axes", format!("need {keep} Bloch vectors, got {}", axes.len()));
        }
        if axes.iter().any(|a| {
            let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            !(norm > 0.0 && norm.is_finite())
        }) {
            errs.push("initial.axes", "every Bloch vector needs a nonzero finite norm");
        }
    }
    if config.initial.preset == Preset::CenterFlipped && keep < 3 {
        errs.push("initial.preset", "center_flipped needs at least 3 spins");
    }

    let noise = &config.noise;
    finite_non_negative(&mut errs, "noise.sigma", noise.sigma);
    if noise.draws_per_period == 0 {
        errs.push("noise.draws_per_period", "must be at least 1");
    }
    if noise.trajectories == 0 {
        errs.push("noise.trajectories", "must be at least 1");
    }
    finite_non_negative(&mut errs, "noise.bz_scale_hz", noise.bz_scale_hz.abs());

    if config.scan.omega_over_j0.is_empty() {
        errs.push("scan.omega_over_j0", "need at least one drive frequency");
    }
    for r in &config.scan.omega_over_j0 {
        if !(*r > 0.0 && r.is_finite()) {
            errs.push("scan.omega_over_j0", format!("{r} is not a positive frequency"));
        } else if config.raman.j0_hz > 0.0 && !(period_of(*r) > 2.0 * s.tukey_ramp_s) {
            errs.push("scan.omega_over_j0", format!("at ω/J₀ = {r} the period is shorter than both ramps"));
        }
    }
    if let Some(d) = config.scan.duration_j0 {
        finite_positive(&mut errs, "scan.duration_j0", d);
    }
    if config.scan.initial_states.is_empty() {
        errs.push("scan.initial_states", "need at least one initial state");
    }
    finite_positive(&mut errs, "analysis.prethermal_threshold", config.analysis.prethermal_threshold);

    let q = &config.qmc;
    let qkeep = q.keep.unwrap_or(n);
    if qkeep == 0 || qkeep > n || (n - qkeep.min(n)) % 2 == 1 {
        errs.push("qmc.keep", format!("need a centred block of 1..={n} spins with N − keep even"));
    }
    if q.betas.is_none() {
        finite_positive(&mut errs, "qmc.t_min", q.t_min);
        if !(q.t_max > q.t_min && q.t_max.is_finite()) {
            errs.push("qmc.t_max", "must exceed t_min");
        }
        if q.points < 5 {
            errs.push("qmc.points", "need at least 5 temperatures");
        }
    }
    let betas = q.beta_grid();
    if betas.len() < 5 {
        errs.push("qmc.betas", "need at least 5 inverse temperatures");
    }
    if betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) || betas.windows(2).any(|w| !(w[1] > w[0])) {
        errs.push("qmc.betas", "must be positive and strictly increasing");
    }
    if !(q.dtau > 0.0 && q.dtau <= 0.05) {
        errs.push("qmc.dtau", "imaginary-time step must lie in (0, 0.05] / J₀");
    }
    if q.sweeps < 32 * q.measure_every.max(1) {
        errs.push("qmc.sweeps", "need at least 32 measurements for binning");
    }
    if q.measure_every == 0 {
        errs.push("qmc.measure_every", "must be at least 1");
    }
    out.qmc.keep = Some(qkeep);
    out.qmc.betas = Some(betas);

    if errs.0.is_empty() {
        Ok(out)
    } else {
        Err(errs)
    }
}

/// Independent seed for a named sub-stream of the global seed.
pub fn substream(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then the splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
