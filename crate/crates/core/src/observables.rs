//! Stroboscopic measurements: per-site ⟨σᵢˣ⟩, the magnetization
//! autocorrelator, the H_eff energy density and a symmetric readout channel.

use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::spinsim::{expectation, HamiltonianSpec, SpinState};

/// Values may exceed ±1 by this much from round-off.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(period: usize) -> Self {
        if period % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// One stroboscopic sample. The `_sem` fields are zero for single runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub period: usize,
    pub parity: Parity,
    /// Seconds.
    pub time: f64,
    /// time·J₀.
    pub time_j0: f64,
    pub site_x: Vec<f64>,
    pub site_x_sem: Vec<f64>,
    pub magnetization: f64,
    pub magnetization_sem: f64,
    /// ⟨H_eff⟩/(N·J₀), when a b_z = 0 reference Hamiltonian was supplied.
    pub energy_density: Option<f64>,
    pub energy_density_sem: f64,
}

/// Records in strictly increasing time, plus the number of trajectories averaged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservableSeries {
    pub records: Vec<Record>,
    pub trajectories: usize,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.records.first().map_or(0, |r| r.site_x.len())
    }

    pub fn times_j0(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time_j0).collect()
    }

    pub fn magnetization(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.magnetization).collect()
    }

    /// Energy densities; `None` if any record lacks one.
    pub fn energy_density(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.energy_density).collect()
    }

    /// Checks the bound and monotone-time invariants.
    pub fn validate(&self) -> Result<()> {
        for pair in self.records.windows(2) {
            if !(pair[1].time > pair[0].time) {
                return Err(invalid("records", "times must increase strictly"));
            }
        }
        for r in &self.records {
            let worst = r.site_x.iter().fold(r.magnetization.abs(), |m, v| m.max(v.abs()));
            if worst > 1.0 + BOUND_SLACK {
                return Err(invalid("records", "magnetization outside [-1, 1]"));
            }
        }
        Ok(())
    }

    /// Column names of the CSV layout written by [`ObservableSeries::csv_rows`].
    pub fn csv_header(&self) -> Vec<String> {
        let mut cols: Vec<String> = ["period", "parity", "t", "t_j0", "M", "M_sem", "eps", "eps_sem"]
            .iter()
            .map(|s| String::from(*s))
            .collect();
        cols.extend((0..self.n_sites()).map(|i| alloc::format!("sx_{i}")));
        cols
    }

    /// One row per record; a missing energy density is written as an empty field.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        use alloc::format;
        self.records
            .iter()
            .map(|r| {
                let mut row = alloc::vec![
                    format!("{}", r.period),
                    String::from(r.parity.as_str()),
                    format!("{:e}", r.time),
                    format!("{}", r.time_j0),
                    format!("{}", r.magnetization),
                    format!("{}", r.magnetization_sem),
                    r.energy_density.map_or(String::new(), |e| format!("{e}")),
                    format!("{}", r.energy_density_sem),
                ];
                row.extend(r.site_x.iter().map(|v| format!("{v}")));
                row
            })
            .collect()
    }
}

/// Exact ⟨σᵢˣ⟩ for every site.
pub fn site_magnetizations(state: &SpinState) -> Vec<f64> {
    let amps = state.amplitudes();
    (0..state.n())
        .map(|site| {
            let bit = 1usize << site;
            let overlap: Complex64 = (0..amps.len())
                .filter(|s| s & bit == 0)
                .map(|s| amps[s].conj() * amps[s | bit])
                .sum();
            2.0 * overlap.re
        })
        .collect()
}

/// M = (1/N) Σᵢ ⟨σᵢˣ(t)⟩⟨σᵢˣ(0)⟩.
pub fn magnetization_autocorrelator(current: &[f64], initial: &[f64]) -> Result<f64> {
    if current.len() != initial.len() {
        return Err(Error::DimensionMismatch {
            expected: initial.len(),
            actual: current.len(),
        });
    }
    if current.is_empty() {
        return Err(invalid("current", "no sites"));
    }
    let sum: f64 = current.iter().zip(initial).map(|(a, b)| a * b).sum();
    Ok(sum / current.len() as f64)
}

/// ⟨ψ|H_eff|ψ⟩/(N·J₀). Refuses a reference Hamiltonian with a σᶻ field.
pub fn energy_density(state: &SpinState, h_eff: &HamiltonianSpec, j0: f64) -> Result<f64> {
    if h_eff.b_z != 0.0 {
        return Err(Error::NonZeroBz { b_z: h_eff.b_z });
    }
    if !(j0 > 0.0) {
        return Err(invalid("j0", "must be positive"));
    }
    Ok(expectation(state, h_eff)? / (state.n() as f64 * j0))
}

/// Binary symmetric flip with probability `p_flip` on each readout.
pub fn readout_channel(values: &[f64], p_flip: f64) -> Result<Vec<f64>> {
    if !(0.0..=0.5).contains(&p_flip) {
        return Err(invalid("p_flip", "must lie in [0, 0.5]"));
    }
    let gain = 1.0 - 2.0 * p_flip;
    Ok(values.iter().map(|v| v * gain).collect())
}

/// What to measure after each period.
#[derive(Debug, Clone)]
pub struct MeasurementPlan {
    /// Reference Hamiltonian for the energy density; must have b_z = 0.
    pub h_eff: Option<HamiltonianSpec>,
    /// Energy unit J₀ (angular frequency).
    pub j0: f64,
    /// Readout flip probability applied to ⟨σᵢˣ⟩ before forming M.
    pub readout_flip: f64,
}

impl MeasurementPlan {
    pub fn new(h_eff: Option<HamiltonianSpec>, j0: f64) -> Result<Self> {
        if let Some(h) = &h_eff {
            if h.b_z != 0.0 {
                return Err(Error::NonZeroBz { b_z: h.b_z });
            }
        }
        if !(j0 > 0.0) {
            return Err(invalid("j0", "must be positive"));
        }
        Ok(Self {
            h_eff,
            j0,
            readout_flip: 0.0,
        })
    }

    /// Site values as reported, after the readout channel.
    pub fn reported_sites(&self, state: &SpinState) -> Result<Vec<f64>> {
        readout_channel(&site_magnetizations(state), self.readout_flip)
    }

    /// Builds the record for `state` at `period`; `initial` are the reported
    /// t = 0 site values.
    pub fn measure(&self, period: usize, time: f64, state: &SpinState, initial: &[f64]) -> Result<Record> {
        let site_x = self.reported_sites(state)?;
        let magnetization = magnetization_autocorrelator(&site_x, initial)?;
        let energy = match &self.h_eff {
            Some(h) => Some(energy_density(state, h, self.j0)?),
            None => None,
        };
        Ok(Record {
            period,
            parity: Parity::of(period),
            time,
            time_j0: time * self.j0,
            site_x_sem: alloc::vec![0.0; site_x.len()],
            site_x,
            magnetization,
            magnetization_sem: 0.0,
            energy_density: energy,
            energy_density_sem: 0.0,
        })
    }
}

/// Mean and standard error of the mean (zero for a single sample).
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Averages equally long single-trajectory series record by record. The
/// input order fixes the floating-point summation order.
pub fn combine_series(runs: &[ObservableSeries]) -> Result<ObservableSeries> {
    let first = runs.first().ok_or_else(|| invalid("runs", "need at least one series"))?;
    let len = first.len();
    if let Some(bad) = runs.iter().find(|r| r.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            actual: bad.len(),
        });
    }
    let n_sites = first.n_sites();
    let mut records = Vec::with_capacity(len);
    for k in 0..len {
        let proto = &first.records[k];
        let column = |f: &dyn Fn(&Record) -> f64| -> (f64, f64) {
            let vals: Vec<f64> = runs.iter().map(|r| f(&r.records[k])).collect();
            mean_sem(&vals)
        };
        let (m, m_sem) = column(&|r| r.magnetization);
        let (energy, energy_sem) = if runs.iter().all(|r| r.records[k].energy_density.is_some()) {
            let (e, s) = column(&|r| r.energy_density.unwrap_or(0.0));
            (Some(e), s)
        } else {
            (None, 0.0)
        };
        let mut site_x = Vec::with_capacity(n_sites);
        let mut site_x_sem = Vec::with_capacity(n_sites);
        for i in 0..n_sites {
            let (v, s) = column(&|r| r.site_x[i]);
            site_x.push(v);
            site_x_sem.push(s);
        }
        records.push(Record {
            period: proto.period,
            parity: proto.parity,
            time: proto.time,
            time_j0: proto.time_j0,
            site_x,
            site_x_sem,
            magnetization: m,
            magnetization_sem: m_sem,
            energy_density: energy,
            energy_density_sem: energy_sem,
        });
    }
    Ok(ObservableSeries {
        records,
        trajectories: runs.iter().map(|r| r.trajectories.max(1)).sum(),
    })
}
