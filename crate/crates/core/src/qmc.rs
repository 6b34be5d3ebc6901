//! Path-integral Monte Carlo for the ferromagnet −H_eff = −Σ J_ij σᵢˣσⱼˣ − B_y Σ σᵢʸ.
//!
//! In the σˣ basis the Ising part is diagonal and the field flips spins, so
//! the Suzuki–Trotter decomposition with L slices maps onto a classical
//! (N × L) Ising model with couplings Δτ·J_ij inside a slice and
//! K = −½ ln tanh(Δτ·B_y) along imaginary time. Every coupling is
//! ferromagnetic, so Swendsen–Wang clusters sample it without a sign problem.
//!
//! Energies are in units of J₀ and β in units of 1/J₀.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{fit_lorentzian_peak, PeakFit};
use crate::error::{invalid, Error, Result};
use crate::ionchain::CouplingMatrix;
use crate::spinsim::{dense_spectrum, DenseSpectrum, HamiltonianSpec};

/// Largest imaginary-time step, in 1/J₀.
pub const DEFAULT_DTAU: f64 = 0.05;
/// Number of bins for the error estimate.
const BINS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalConfig {
    /// J_ij of H_eff (angular frequency).
    pub couplings: CouplingMatrix,
    /// B_y of H_eff (angular frequency).
    pub b_y: f64,
    /// Energy unit J₀ (angular frequency).
    pub j0: f64,
    /// Strictly increasing inverse temperatures, 1/J₀ units.
    pub betas: Vec<f64>,
    pub sweeps: usize,
    pub thermalization: usize,
    /// Sweeps between measurements.
    pub measure_every: usize,
    /// Upper bound on β/L.
    pub dtau: f64,
    pub seed: u64,
}

impl ThermalConfig {
    pub fn new(couplings: CouplingMatrix, b_y: f64, j0: f64, betas: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            couplings,
            b_y,
            j0,
            betas,
            sweeps: 20_000,
            thermalization: 2_000,
            measure_every: 1,
            dtau: DEFAULT_DTAU,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j0 > 0.0) {
            return Err(invalid("j0", "must be positive"));
        }
        if self.b_y < 0.0 || !self.b_y.is_finite() {
            return Err(invalid("b_y", "must be finite and non-negative"));
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(invalid("betas", "need positive, finite inverse temperatures"));
        }
        if self.betas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("betas", "must increase strictly"));
        }
        if self.sweeps < BINS || self.measure_every == 0 {
            return Err(invalid("sweeps", "need at least 32 measured sweeps"));
        }
        if !(self.dtau > 0.0) {
            return Err(invalid("dtau", "must be positive"));
        }
        if (0..self.n()).any(|i| ((i + 1)..self.n()).any(|j| self.couplings.get(i, j) < 0.0)) {
            return Err(invalid("couplings", "J_ij must be non-negative for a sign-free simulation"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.couplings.n()
    }

    /// Imaginary-time slices used at `beta`.
    pub fn slices(&self, beta: f64) -> usize {
        if self.b_y == 0.0 {
            1
        } else {
            ((beta / self.dtau).ceil() as usize).max(2)
        }
    }

    fn field(&self) -> f64 {
        self.b_y / self.j0
    }

    fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings.get(i, j) / self.j0
    }
}

/// Monte Carlo estimate at one β. Energies are totals, not per site.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalEstimate {
    pub beta: f64,
    pub energy: f64,
    pub energy_error: f64,
    /// ⟨|m_x|⟩ with m_x the space-time average of σˣ.
    pub abs_magnetization: f64,
    pub abs_magnetization_error: f64,
    pub slices: usize,
    /// Set when the binned error is still growing with bin size.
    pub poorly_decorrelated: bool,
}

/// Crossover location expressed in the H_eff convention, ⟨H_eff⟩/(N·J₀).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    pub energy_density: f64,
    pub width: f64,
    pub temperature: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalPoint {
    pub estimate: ThermalEstimate,
    /// C_V = dE/dT from finite differences over the β grid.
    pub heat_capacity: f64,
    pub heat_capacity_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalScan {
    pub n: usize,
    pub points: Vec<ThermalPoint>,
    pub peak: PeakFit,
    pub crossover: Crossover,
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let up = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = up;
            x = up;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }
}

/// Sampler state for one β: spins[l * n + i] = ±1.
struct Chain {
    n: usize,
    slices: usize,
    spins: Vec<i8>,
    /// Pair list (i, j, bond probability inside a slice) with J_ij > 0.
    pairs: Vec<(usize, usize, f64)>,
    /// Bond probability along imaginary time.
    p_time: f64,
    uf: UnionFind,
    flip: Vec<i8>,
}

impl Chain {
    fn new(cfg: &ThermalConfig, beta: f64, rng: &mut ChaCha8Rng) -> Self {
        let n = cfg.n();
        let slices = cfg.slices(beta);
        let dtau = beta / slices as f64;
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let k = dtau * cfg.coupling(i, j);
                if k > 0.0 {
                    pairs.push((i, j, -(-2.0 * k).exp_m1()));
                }
            }
        }
        let p_time = if cfg.b_y == 0.0 {
            1.0
        } else {
            // 1 − exp(−2K) with K = −½ ln tanh(Δτ B) is 1 − tanh(Δτ B).
            1.0 - (dtau * cfg.field()).tanh()
        };
        let spins = (0..n * slices).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self {
            n,
            slices,
            spins,
            pairs,
            p_time,
            uf: UnionFind::new(n * slices),
            flip: alloc::vec![0; n * slices],
        }
    }

    fn sweep(&mut self, rng: &mut ChaCha8Rng) {
        let n = self.n;
        self.uf.reset();
        for l in 0..self.slices {
            let base = l * n;
            for &(i, j, p) in &self.pairs {
                if self.spins[base + i] == self.spins[base + j] && rng.random::<f64>() < p {
                    self.uf.union((base + i) as u32, (base + j) as u32);
                }
            }
            if self.slices > 1 {
                let next = ((l + 1) % self.slices) * n;
                for i in 0..n {
                    if self.spins[base + i] == self.spins[next + i]
                        && (self.p_time >= 1.0 || rng.random::<f64>() < self.p_time)
                    {
                        self.uf.union((base + i) as u32, (next + i) as u32);
                    }
                }
            }
        }
        // Each cluster root draws its flip once; roots are visited before their members
        // because union keeps the smaller index as root.
        for s in 0..self.spins.len() {
            let r = self.uf.find(s as u32) as usize;
            if r == s {
                self.flip[s] = if rng.random::<bool>() { -1 } else { 1 };
            }
            self.spins[s] *= self.flip[r];
        }
    }

    /// (Σ_l Σ_{i<j} J_ij s s, Σ_{i,l} s_il s_i,l+1, Σ s) in J₀ units.
    fn sums(&self, cfg: &ThermalConfig) -> (f64, f64, f64) {
        let n = self.n;
        let mut s_j = 0.0;
        let mut s_t = 0.0;
        for l in 0..self.slices {
            let base = l * n;
            for &(i, j, _) in &self.pairs {
                s_j += cfg.coupling(i, j) * f64::from(self.spins[base + i] * self.spins[base + j]);
            }
            let next = ((l + 1) % self.slices) * n;
            for i in 0..n {
                s_t += f64::from(self.spins[base + i] * self.spins[next + i]);
            }
        }
        let m = self.spins.iter().map(|s| f64::from(*s)).sum();
        (s_j, s_t, m)
    }
}

/// −∂ ln Z_L/∂β at fixed L for one configuration.
fn energy_estimator(cfg: &ThermalConfig, beta: f64, slices: usize, s_j: f64, s_t: f64) -> f64 {
    let l = slices as f64;
    let b = cfg.field();
    if b == 0.0 {
        return -s_j / l;
    }
    let x = 2.0 * beta / l * b;
    -s_j / l - cfg.n() as f64 * b / x.tanh() + b / x.sinh() * s_t / l
}

fn binned(values: &[f64]) -> (f64, f64, bool) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let err_with = |bins: usize| {
        let per = n / bins;
        let means: Vec<f64> = (0..bins)
            .map(|b| values[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
            .collect();
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (bins - 1) as f64;
        (var / bins as f64).sqrt()
    };
    let coarse = err_with(BINS);
    // Errors that still grow between 64 and 32 bins mean the bins are not yet independent.
    let finer = err_with((2 * BINS).min(n));
    (mean, coarse, coarse > 1.5 * finer)
}

/// Estimates ⟨−H_eff⟩ at `beta` on the ChaCha stream `replica`.
pub fn thermal_energy(cfg: &ThermalConfig, beta: f64, replica: u64) -> Result<ThermalEstimate> {
    cfg.validate()?;
    if !(beta > 0.0) {
        return Err(invalid("beta", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(replica);
    let mut chain = Chain::new(cfg, beta, &mut rng);
    for _ in 0..cfg.thermalization {
        chain.sweep(&mut rng);
    }
    let total = (chain.n * chain.slices) as f64;
    let mut energies = Vec::with_capacity(cfg.sweeps / cfg.measure_every + 1);
    let mut mags = Vec::with_capacity(energies.capacity());
    for k in 0..cfg.sweeps {
        chain.sweep(&mut rng);
        if k % cfg.measure_every == 0 {
            let (s_j, s_t, m) = chain.sums(cfg);
            energies.push(energy_estimator(cfg, beta, chain.slices, s_j, s_t));
            mags.push((m / total).abs());
        }
    }
    if energies.len() < BINS {
        return Err(invalid("sweeps", "too few measurements for binning"));
    }
    let (energy, energy_error, flag_e) = binned(&energies);
    let (abs_m, abs_m_err, flag_m) = binned(&mags);
    Ok(ThermalEstimate {
        beta,
        energy,
        energy_error,
        abs_magnetization: abs_m,
        abs_magnetization_error: abs_m_err,
        slices: chain.slices,
        poorly_decorrelated: flag_e || flag_m,
    })
}

/// Weights of a three-point derivative of f(β) at grid index `k`.
fn derivative_stencil(betas: &[f64], k: usize) -> [(usize, f64); 3] {
    let n = betas.len();
    let (a, b, c) = if k == 0 {
        (0, 1, 2)
    } else if k + 1 == n {
        (n - 3, n - 2, n - 1)
    } else {
        (k - 1, k, k + 1)
    };
    let (xa, xb, xc, x) = (betas[a], betas[b], betas[c], betas[k]);
    // Derivative of the Lagrange interpolant through (a, b, c), evaluated at x.
    let wa = ((x - xb) + (x - xc)) / ((xa - xb) * (xa - xc));
    let wb = ((x - xa) + (x - xc)) / ((xb - xa) * (xb - xc));
    let wc = ((x - xa) + (x - xb)) / ((xc - xa) * (xc - xb));
    [(a, wa), (b, wb), (c, wc)]
}

/// C_V = dE/dT = −β² dE/dβ on the grid, with errors from independent E(β).
pub fn finite_difference_heat_capacity(betas: &[f64], energies: &[f64], errors: &[f64]) -> Result<Vec<(f64, f64)>> {
    if betas.len() < 3 || energies.len() != betas.len() || errors.len() != betas.len() {
        return Err(Error::TooFewPoints {
            needed: 3,
            have: betas.len().min(energies.len()),
        });
    }
    Ok((0..betas.len())
        .map(|k| {
            let st = derivative_stencil(betas, k);
            let d: f64 = st.iter().map(|(i, w)| w * energies[*i]).sum();
            let var: f64 = st.iter().map(|(i, w)| (w * errors[*i]).powi(2)).sum();
            let b2 = betas[k] * betas[k];
            (-b2 * d, b2 * var.sqrt())
        })
        .collect())
}

/// Builds the scan from per-β estimates (in grid order) and fits the C_V peak.
pub fn assemble_scan(cfg: &ThermalConfig, estimates: Vec<ThermalEstimate>) -> Result<ThermalScan> {
    let betas: Vec<f64> = estimates.iter().map(|e| e.beta).collect();
    let energies: Vec<f64> = estimates.iter().map(|e| e.energy).collect();
    let errors: Vec<f64> = estimates.iter().map(|e| e.energy_error).collect();
    let cv = finite_difference_heat_capacity(&betas, &energies, &errors)?;
    let points: Vec<ThermalPoint> = estimates
        .into_iter()
        .zip(&cv)
        .map(|(estimate, (c, e))| ThermalPoint {
            estimate,
            heat_capacity: *c,
            heat_capacity_error: *e,
        })
        .collect();
    let peak = fit_heat_capacity_peak(&points)?;
    let crossover = crossover_from(cfg.n(), &betas, &energies, &cv, &peak)?;
    Ok(ThermalScan {
        n: cfg.n(),
        points,
        peak,
        crossover,
    })
}

/// Lorentzian in T through the C_V points; the peak must be interior.
fn fit_heat_capacity_peak(points: &[ThermalPoint]) -> Result<PeakFit> {
    let (imax, _) = points
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, p)| if p.heat_capacity > acc.1 { (k, p.heat_capacity) } else { acc });
    if imax == 0 {
        return Err(Error::PeakNotBracketed {
            hint: "C_V is largest at the smallest beta; extend the grid to smaller beta".into(),
        });
    }
    if imax + 1 == points.len() {
        return Err(Error::PeakNotBracketed {
            hint: "C_V is largest at the largest beta; extend the grid to larger beta".into(),
        });
    }
    // Only the contiguous region above half maximum is fitted, since the tails
    // of a finite-size C_V are not Lorentzian. It is widened to at least five points.
    let half = 0.5 * points[imax].heat_capacity;
    let mut lo = imax;
    while lo > 0 && points[lo - 1].heat_capacity >= half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < points.len() && points[hi + 1].heat_capacity >= half {
        hi += 1;
    }
    while hi - lo < 4 && (lo > 0 || hi + 1 < points.len()) {
        if lo > 0 {
            lo -= 1;
        }
        if hi - lo < 4 && hi + 1 < points.len() {
            hi += 1;
        }
    }
    // Reverse so that temperature increases along the fit axis.
    let window = &points[lo..=hi];
    let t: Vec<f64> = window.iter().rev().map(|p| 1.0 / p.estimate.beta).collect();
    let c: Vec<f64> = window.iter().rev().map(|p| p.heat_capacity).collect();
    let e: Vec<f64> = window.iter().rev().map(|p| p.heat_capacity_error.max(1e-12)).collect();
    fit_lorentzian_peak(&t, &c, Some(&e))
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|v| *v < x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
}

fn crossover_from(n: usize, betas: &[f64], energies: &[f64], cv: &[(f64, f64)], peak: &PeakFit) -> Result<Crossover> {
    let temperature = peak.center;
    let beta = 1.0 / temperature;
    if beta < betas[0] || beta > betas[betas.len() - 1] {
        return Err(Error::PeakNotBracketed {
            hint: "fitted peak lies outside the beta grid".into(),
        });
    }
    let e = interpolate(betas, energies, beta);
    let slope = interpolate(betas, &cv.iter().map(|c| c.0).collect::<Vec<_>>(), beta);
    // |dE/dT|·ΔT with ΔT the quarter-width of the fitted peak.
    let width = (slope * peak.width).abs() / n as f64;
    Ok(Crossover {
        energy_density: -e / n as f64,
        width,
        temperature,
        beta,
    })
}

/// Sequential scan over the configured β grid, one ChaCha stream per point.
pub fn heat_capacity_scan(cfg: &ThermalConfig) -> Result<ThermalScan> {
    let estimates = cfg
        .betas
        .iter()
        .enumerate()
        .map(|(k, b)| thermal_energy(cfg, *b, k as u64))
        .collect::<Result<Vec<_>>>()?;
    assemble_scan(cfg, estimates)
}

pub fn crossover_energy_density(scan: &ThermalScan) -> Crossover {
    scan.crossover
}

/// Spectrum of −H_eff in J₀ units, for exact comparisons at small N.
pub fn exact_spectrum(cfg: &ThermalConfig) -> Result<DenseSpectrum> {
    let neg = cfg.couplings.scaled(-1.0 / cfg.j0);
    dense_spectrum(&HamiltonianSpec::new(neg, -cfg.field(), 0.0))
}

/// Exact classical energies for b_y = 0 by enumerating all 2^N states.
pub fn classical_thermal_energy(couplings: &CouplingMatrix, j0: f64, beta: f64) -> f64 {
    let n = couplings.n();
    let mut levels = Vec::with_capacity(1 << n);
    for s in 0..1usize << n {
        let signs: Vec<f64> = (0..n).map(|i| if (s >> i) & 1 == 1 { -1.0 } else { 1.0 }).collect();
        levels.push(-couplings.classical_energy(&signs) / j0);
    }
    let e0 = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut z, mut e) = (0.0, 0.0);
    for l in levels {
        let w = (-beta * (l - e0)).exp();
        z += w;
        e += w * l;
    }
    e / z
}

/// Samples configurations of the Trotterized 2-spin model for a stationarity test.
/// Returns visit counts indexed by the packed (N·L)-bit configuration.
pub fn sample_configurations(cfg: &ThermalConfig, beta: f64, samples: usize, replica: u64) -> Result<Vec<u64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(replica);
    let mut chain = Chain::new(cfg, beta, &mut rng);
    let sites = chain.spins.len();
    if sites > 16 {
        return Err(Error::TooLarge { n: sites, max: 16 });
    }
    for _ in 0..cfg.thermalization {
        chain.sweep(&mut rng);
    }
    let mut counts = alloc::vec![0u64; 1 << sites];
    for _ in 0..samples {
        chain.sweep(&mut rng);
        let idx = chain.spins.iter().enumerate().fold(0usize, |acc, (k, s)| acc | (usize::from(*s < 0) << k));
        counts[idx] += 1;
    }
    Ok(counts)
}

/// Exact Boltzmann weights of the Trotterized model matching [`sample_configurations`].
pub fn configuration_weights(cfg: &ThermalConfig, beta: f64) -> Vec<f64> {
    let n = cfg.n();
    let slices = cfg.slices(beta);
    let dtau = beta / slices as f64;
    let k_time = if cfg.b_y == 0.0 {
        f64::INFINITY
    } else {
        -0.5 * (dtau * cfg.field()).tanh().ln()
    };
    let sites = n * slices;
    let mut w: Vec<f64> = (0..1usize << sites)
        .map(|c| {
            let s = |l: usize, i: usize| if (c >> (l * n + i)) & 1 == 1 { -1.0 } else { 1.0 };
            let mut log_w = 0.0;
            for l in 0..slices {
                for i in 0..n {
                    for j in (i + 1)..n {
                        log_w += dtau * cfg.coupling(i, j) * s(l, i) * s(l, j);
                    }
                    if slices > 1 {
                        let aligned = s(l, i) * s((l + 1) % slices, i);
                        if k_time.is_infinite() {
                            if aligned < 0.0 {
                                return 0.0;
                            }
                        } else {
                            log_w += k_time * aligned;
                        }
                    }
                }
            }
            log_w.exp()
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    w
}
