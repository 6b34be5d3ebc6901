//! Linear Paul-trap ion chains: equilibrium positions, transverse normal modes
//! and the spin-spin couplings mediated by a far-detuned bichromatic drive.
//!
//! Unit convention: every Hamiltonian quantity (Rabi frequency, beatnote
//! detuning, recoil frequency, couplings) is an angular frequency in rad/s.
//! Trap and mode frequencies are plain Hz, and are multiplied by 2π exactly
//! once, where they enter the coupling and spin-flip formulas.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};

/// Mass of a ¹⁷¹Yb⁺ ion in kg.
pub const YB171_MASS: f64 = 170.936_325_8 * 1.660_539_066_60e-27;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Wavelength of the Raman beams, m.
pub const RAMAN_WAVELENGTH: f64 = 355e-9;
/// Beatnote detuning above the COM mode used by [`RamanConfig::experiment_defaults`], Hz.
pub const DEFAULT_DETUNING_ABOVE_COM_HZ: f64 = 100e3;
/// Default resonance guard: |μ − 2πf_m| must exceed this multiple of η_m·Ω.
pub const DEFAULT_GUARD_FACTOR: f64 = 1.0;
/// Mean nearest-neighbour coupling of the 25-ion experiment, rad/s.
pub const EXPERIMENT_J0: f64 = 2.0 * PI * 330.0;

const EQUILIBRIUM_TOL: f64 = 1e-13;
const EQUILIBRIUM_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TrapConfig {
    pub n_ions: usize,
    /// Transverse centre-of-mass frequency, Hz.
    pub f_com: f64,
    /// Axial centre-of-mass frequency, Hz.
    pub f_z: f64,
    /// Ion mass, kg.
    pub ion_mass: f64,
}

impl TrapConfig {
    pub fn new(n_ions: usize, f_com: f64, f_z: f64) -> Result<Self> {
        let trap = Self {
            n_ions,
            f_com,
            f_z,
            ion_mass: YB171_MASS,
        };
        trap.validate()?;
        Ok(trap)
    }

    /// The 25-ion chain at 4.67 MHz transverse and 0.34 MHz axial confinement.
    pub fn experiment() -> Self {
        Self {
            n_ions: 25,
            f_com: 4.67e6,
            f_z: 0.34e6,
            ion_mass: YB171_MASS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(invalid("n_ions", "need at least one ion"));
        }
        if !(self.f_z > 0.0) {
            return Err(invalid("f_z", "axial frequency must be positive"));
        }
        if !(self.f_com > self.f_z) {
            return Err(invalid(
                "f_com",
                "transverse confinement must exceed the axial one",
            ));
        }
        if !(self.ion_mass > 0.0) {
            return Err(invalid("ion_mass", "mass must be positive"));
        }
        Ok(())
    }

    /// Coulomb length scale ℓ = (e²/(4πε₀ M ω_z²))^(1/3) in metres.
    pub fn length_scale(&self) -> f64 {
        const COULOMB: f64 = 2.307_077_552e-28; // e²/(4πε₀), J·m
        let wz = 2.0 * PI * self.f_z;
        (COULOMB / (self.ion_mass * wz * wz)).cbrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamanConfig {
    /// Rabi frequency Ω, rad/s.
    pub rabi: f64,
    /// Symmetric beatnote detuning μ, rad/s.
    pub detuning: f64,
    /// Recoil frequency ħΔk²/(2M), rad/s.
    pub recoil: f64,
}

impl RamanConfig {
    /// Recoil frequency for a beatnote wavevector `delta_k` (1/m) on an ion of `mass` kg.
    pub fn recoil_from_wavevector(delta_k: f64, mass: f64) -> f64 {
        HBAR * delta_k * delta_k / (2.0 * mass)
    }

    /// Recoil of two 355 nm beams crossing at 90°.
    pub fn orthogonal_beam_recoil(mass: f64) -> f64 {
        let delta_k = 2.0.sqrt() * 2.0 * PI / RAMAN_WAVELENGTH;
        Self::recoil_from_wavevector(delta_k, mass)
    }

    /// Operating point for `trap`: detuned [`DEFAULT_DETUNING_ABOVE_COM_HZ`] above
    /// the COM mode, with a placeholder Rabi frequency that [`calibrate_rabi`] rescales.
    pub fn experiment_defaults(trap: &TrapConfig) -> Self {
        Self {
            rabi: 2.0 * PI * 300e3,
            detuning: 2.0 * PI * (trap.f_com + DEFAULT_DETUNING_ABOVE_COM_HZ),
            recoil: Self::orthogonal_beam_recoil(trap.ion_mass),
        }
    }

    /// Lamb–Dicke parameter η = √(ω_R/ω) for an angular mode frequency.
    pub fn lamb_dicke(&self, mode_angular: f64) -> f64 {
        (self.recoil / mode_angular).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeData {
    /// Dimensionless axial positions in units of [`TrapConfig::length_scale`].
    pub positions: Vec<f64>,
    /// Transverse mode frequencies in Hz, sorted descending (COM first).
    pub frequencies: Vec<f64>,
    /// Column `m` holds the participation b_im of each ion in mode `m`.
    pub vectors: DMatrix<f64>,
}

impl ModeData {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn participation(&self, ion: usize, mode: usize) -> f64 {
        self.vectors[(ion, mode)]
    }

    /// Largest deviation of BᵀB from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.transpose() * &self.vectors;
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Symmetric N×N spin-spin coupling matrix in rad/s with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    values: DMatrix<f64>,
    j0: Option<f64>,
}

impl CouplingMatrix {
    /// Wraps a square matrix; the diagonal is discarded and the matrix symmetrised.
    pub fn from_matrix(mut values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                actual: values.ncols(),
            });
        }
        let n = values.nrows();
        if n == 0 {
            return Err(invalid("couplings", "empty matrix"));
        }
        for i in 0..n {
            values[(i, i)] = 0.0;
            for j in (i + 1)..n {
                let s = 0.5 * (values[(i, j)] + values[(j, i)]);
                values[(i, j)] = s;
                values[(j, i)] = s;
            }
        }
        let j0 = nearest_neighbour_mean(&values);
        Ok(Self { values, j0 })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| f(i.min(j), i.max(j))))
    }

    /// Uniform nearest-neighbour-only chain, handy in tests.
    pub fn nearest_neighbour(n: usize, j: f64) -> Result<Self> {
        Self::from_fn(n, |i, k| if k == i + 1 { j } else { 0.0 })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Mean of J_{i,i+1}; `None` for a single spin.
    pub fn j0(&self) -> Option<f64> {
        self.j0
    }

    pub fn require_j0(&self) -> Result<f64> {
        self.j0.ok_or(Error::UndefinedJ0)
    }

    /// Σ_{i<j} J_ij s_i s_j for a classical configuration of ±1 signs.
    pub fn classical_energy(&self, signs: &[f64]) -> f64 {
        let n = self.n();
        let mut e = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                e += self.values[(i, j)] * signs[i] * signs[j];
            }
        }
        e
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: &self.values * factor,
            j0: self.j0.map(|j| j * factor),
        }
    }

    /// Average, minimum and maximum coupling at each separation |i − j| ≥ 1.
    pub fn distance_profile(&self) -> Vec<DistanceBin> {
        let n = self.n();
        (1..n)
            .map(|d| {
                let vals: Vec<f64> = (0..n - d).map(|i| self.values[(i, i + d)]).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                DistanceBin {
                    distance: d,
                    mean,
                    min,
                    max,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceBin {
    pub distance: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

fn nearest_neighbour_mean(values: &DMatrix<f64>) -> Option<f64> {
    let n = values.nrows();
    if n < 2 {
        return None;
    }
    let s: f64 = (0..n - 1).map(|i| values[(i, i + 1)]).sum();
    Some(s / (n - 1) as f64)
}

fn force_residual(u: &[f64], out: &mut [f64]) {
    let n = u.len();
    for i in 0..n {
        let mut f = u[i];
        for j in 0..n {
            if j < i {
                let d = u[i] - u[j];
                f -= 1.0 / (d * d);
            } else if j > i {
                let d = u[j] - u[i];
                f += 1.0 / (d * d);
            }
        }
        out[i] = f;
    }
}

fn potential(u: &[f64]) -> f64 {
    let n = u.len();
    let mut v = 0.0;
    for i in 0..n {
        v += 0.5 * u[i] * u[i];
        for j in (i + 1)..n {
            v += 1.0 / (u[j] - u[i]);
        }
    }
    v
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Dimensionless axial equilibrium positions, sorted ascending.
///
/// The force balance u_i = Σ_{j<i} (u_i−u_j)⁻² − Σ_{j>i} (u_j−u_i)⁻² is the
/// gradient of a function that is convex on ordered configurations, so a
/// Newton step with backtracking on that function converges from any ordered seed.
pub fn equilibrium_positions(trap: &TrapConfig) -> Result<Vec<f64>> {
    trap.validate()?;
    let n = trap.n_ions;
    if n == 1 {
        return Ok(alloc::vec![0.0]);
    }
    let spacing = 2.018 / (n as f64).powf(0.559);
    let mut u: Vec<f64> = (0..n)
        .map(|i| (i as f64 - 0.5 * (n - 1) as f64) * spacing)
        .collect();
    let mut residual = alloc::vec![0.0; n];
    force_residual(&u, &mut residual);

    let mut iterations = 0;
    while max_abs(&residual) > EQUILIBRIUM_TOL {
        if iterations == EQUILIBRIUM_MAX_ITER {
            return Err(Error::EquilibriumNotConverged {
                iterations,
                residual: max_abs(&residual),
            });
        }
        iterations += 1;

        let mut jac = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let c = 2.0 / (u[i] - u[j]).abs().powi(3);
                    jac[(i, i)] += c;
                    jac[(i, j)] -= c;
                }
            }
        }
        let rhs = DVector::from_column_slice(&residual);
        let step = match jac.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => rhs,
        };

        let v0 = potential(&u);
        let mut scale = 1.0;
        let mut trial = u.clone();
        loop {
            for i in 0..n {
                trial[i] = u[i] - scale * step[i];
            }
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            // Close to the minimum the potential stops resolving progress; accept then.
            if ordered && (potential(&trial) <= v0 || scale * max_abs(step.as_slice()) < 1e-10) {
                break;
            }
            scale *= 0.5;
            if scale < 1e-12 {
                return Err(Error::EquilibriumNotConverged {
                    iterations,
                    residual: max_abs(&residual),
                });
            }
        }
        u.copy_from_slice(&trial);
        force_residual(&u, &mut residual);
    }

    // Enforce the mirror symmetry the exact solution has.
    for i in 0..n / 2 {
        let a = 0.5 * (u[n - 1 - i] - u[i]);
        u[i] = -a;
        u[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        u[n / 2] = 0.0;
    }
    Ok(u)
}

/// Largest force-balance residual of a position list.
pub fn force_balance_residual(positions: &[f64]) -> f64 {
    let mut r = alloc::vec![0.0; positions.len()];
    force_residual(positions, &mut r);
    max_abs(&r)
}

/// Transverse normal modes of the chain at `positions`.
pub fn transverse_modes(positions: &[f64], trap: &TrapConfig) -> Result<ModeData> {
    trap.validate()?;
    let n = positions.len();
    if n != trap.n_ions {
        return Err(Error::DimensionMismatch {
            expected: trap.n_ions,
            actual: n,
        });
    }
    let ratio = (trap.f_com / trap.f_z).powi(2);
    let mut hessian = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = ratio;
        for j in 0..n {
            if i != j {
                let c = 1.0 / (positions[i] - positions[j]).abs().powi(3);
                diag -= c;
                hessian[(i, j)] = c;
            }
        }
        hessian[(i, i)] = diag;
    }

    let eig = SymmetricEigen::new(hessian);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut frequencies = Vec::with_capacity(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (m, &k) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= 0.0 {
            return Err(Error::UnstableMode {
                mode: m,
                squared: lambda,
            });
        }
        frequencies.push(trap.f_z * lambda.sqrt());
        let col = eig.eigenvectors.column(k);
        // Sign convention: first non-negligible component positive.
        let lead = col.iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, m)] = sign * col[i];
        }
    }
    Ok(ModeData {
        positions: positions.to_vec(),
        frequencies,
        vectors,
    })
}

fn check_detuning(modes: &ModeData, raman: &RamanConfig, guard_factor: f64) -> Result<()> {
    let w_com = 2.0 * PI * modes.frequencies[0];
    if !(raman.detuning > w_com) {
        return Err(invalid(
            "detuning",
            "beatnote must be detuned above the COM mode",
        ));
    }
    for (m, &f) in modes.frequencies.iter().enumerate() {
        let w = 2.0 * PI * f;
        let gap = (raman.detuning - w).abs();
        let guard = guard_factor * raman.lamb_dicke(w) * raman.rabi.abs();
        if gap <= guard {
            return Err(Error::Resonance { mode: m, gap, guard });
        }
    }
    Ok(())
}

fn mode_sum(modes: &ModeData, weight: impl Fn(f64) -> f64, prefactor: f64) -> Result<CouplingMatrix> {
    let n = modes.n();
    let weights: Vec<f64> = modes
        .frequencies
        .iter()
        .map(|&f| weight(2.0 * PI * f))
        .collect();
    let values = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let s: f64 = (0..weights.len())
            .map(|m| modes.vectors[(i, m)] * modes.vectors[(j, m)] * weights[m])
            .sum();
        prefactor * s
    });
    CouplingMatrix::from_matrix(values)
}

/// J_ij = Ω² ω_R Σ_m b_im b_jm / (μ² − (2πf_m)²) with the default resonance guard.
pub fn coupling_matrix(modes: &ModeData, raman: &RamanConfig) -> Result<CouplingMatrix> {
    coupling_matrix_with_guard(modes, raman, DEFAULT_GUARD_FACTOR)
}

pub fn coupling_matrix_with_guard(
    modes: &ModeData,
    raman: &RamanConfig,
    guard_factor: f64,
) -> Result<CouplingMatrix> {
    check_detuning(modes, raman, guard_factor)?;
    let mu2 = raman.detuning * raman.detuning;
    mode_sum(
        modes,
        |w| 1.0 / (mu2 - w * w),
        raman.rabi * raman.rabi * raman.recoil,
    )
}

/// Lamb–Dicke form J_ij ≈ (Ω²/2) Σ_m b_im b_jm η_m² / δ_m with δ_m = μ − 2πf_m.
pub fn coupling_matrix_approx(modes: &ModeData, raman: &RamanConfig) -> Result<CouplingMatrix> {
    check_detuning(modes, raman, DEFAULT_GUARD_FACTOR)?;
    mode_sum(
        modes,
        |w| raman.recoil / w / (raman.detuning - w),
        0.5 * raman.rabi * raman.rabi,
    )
}

/// Rescales Ω so the mean nearest-neighbour coupling equals `target_j0` (rad/s).
pub fn calibrate_rabi(modes: &ModeData, raman: &RamanConfig, target_j0: f64) -> Result<RamanConfig> {
    if !(target_j0 > 0.0) {
        return Err(invalid("target_j0", "calibration target must be positive"));
    }
    if modes.n() < 2 {
        return Err(Error::UndefinedJ0);
    }
    // Shape with the guard disabled; the calibrated Ω is checked at the end.
    let unit = RamanConfig {
        rabi: 1.0,
        ..*raman
    };
    let shape = coupling_matrix_with_guard(modes, &unit, 0.0)?;
    let j0 = shape.require_j0()?;
    let calibrated = RamanConfig {
        rabi: (target_j0 / j0).sqrt(),
        ..*raman
    };
    check_detuning(modes, &calibrated, DEFAULT_GUARD_FACTOR)?;
    Ok(calibrated)
}

/// Central `keep`×`keep` block; needs N − keep even.
pub fn truncate_chain(couplings: &CouplingMatrix, keep: usize) -> Result<CouplingMatrix> {
    let n = couplings.n();
    if keep == 0 || keep > n {
        return Err(invalid("keep", "must lie in 1..=N"));
    }
    if (n - keep) % 2 != 0 {
        return Err(Error::TruncationParity { n, keep });
    }
    truncate_chain_at(couplings, keep, (n - keep) / 2)
}

/// The `keep`×`keep` block starting at row/column `offset`.
pub fn truncate_chain_at(
    couplings: &CouplingMatrix,
    keep: usize,
    offset: usize,
) -> Result<CouplingMatrix> {
    let n = couplings.n();
    if keep == 0 || offset + keep > n {
        return Err(invalid("keep", "block does not fit inside the chain"));
    }
    CouplingMatrix::from_matrix(couplings.values.view((offset, offset), (keep, keep)).into_owned())
}

/// Σ_m (η_m b_im Ω / δ_m)² with δ_m = μ − 2πf_m.
pub fn spin_flip_probability(modes: &ModeData, raman: &RamanConfig, ion: usize) -> Result<f64> {
    if ion >= modes.n() {
        return Err(invalid("ion_index", "outside the chain"));
    }
    let mut p = 0.0;
    for (m, &f) in modes.frequencies.iter().enumerate() {
        let w = 2.0 * PI * f;
        let delta = raman.detuning - w;
        if delta == 0.0 {
            return Err(Error::Resonance {
                mode: m,
                gap: 0.0,
                guard: 0.0,
            });
        }
        let amp = raman.lamb_dicke(w) * modes.vectors[(ion, m)] * raman.rabi / delta;
        p += amp * amp;
    }
    Ok(p)
}

pub fn mean_spin_flip_probability(modes: &ModeData, raman: &RamanConfig) -> Result<f64> {
    let n = modes.n();
    let mut total = 0.0;
    for i in 0..n {
        total += spin_flip_probability(modes, raman, i)?;
    }
    Ok(total / n as f64)
}

/// A fully built chain: trap, calibrated drive, modes and couplings.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub trap: TrapConfig,
    pub raman: RamanConfig,
    pub modes: ModeData,
    pub couplings: CouplingMatrix,
}

impl ChainModel {
    /// Builds the chain and calibrates Ω so that j0 = `target_j0`.
    pub fn calibrated(trap: TrapConfig, raman: RamanConfig, target_j0: f64) -> Result<Self> {
        let positions = equilibrium_positions(&trap)?;
        let modes = transverse_modes(&positions, &trap)?;
        let raman = calibrate_rabi(&modes, &raman, target_j0)?;
        let couplings = coupling_matrix(&modes, &raman)?;
        Ok(Self {
            trap,
            raman,
            modes,
            couplings,
        })
    }

    pub fn experiment() -> Result<Self> {
        let trap = TrapConfig::experiment();
        let raman = RamanConfig::experiment_defaults(&trap);
        Self::calibrated(trap, raman, EXPERIMENT_J0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(lo) > 0.0) == (f(mid) > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn trap(n: usize) -> TrapConfig {
        TrapConfig::new(n, 4.67e6, 0.34e6).unwrap()
    }

    #[test]
    fn single_ion_sits_at_centre() {
        assert_eq!(equilibrium_positions(&trap(1)).unwrap(), alloc::vec![0.0]);
    }

    #[test]
    fn two_and_three_ions_match_root_find() {
        // 2u = 1/(2u)^2 and u = 1/u^2 + 1/(2u)^2 respectively.
        let u2 = bisect(|u| u - 1.0 / (4.0 * u * u), 0.1, 2.0);
        let u3 = bisect(|u| u - 1.0 / (u * u) - 1.0 / (4.0 * u * u), 0.1, 3.0);
        assert!((u2 - 0.629_960_5).abs() < 1e-6);
        assert!((u3 - 1.077_217).abs() < 1e-6);

        let p2 = equilibrium_positions(&trap(2)).unwrap();
        assert!((p2[0] + u2).abs() < 1e-12 && (p2[1] - u2).abs() < 1e-12);
        let p3 = equilibrium_positions(&trap(3)).unwrap();
        assert!((p3[0] + u3).abs() < 1e-12 && p3[1].abs() < 1e-15 && (p3[2] - u3).abs() < 1e-12);
    }

    #[test]
    fn residuals_small_up_to_fifty_ions() {
        for n in [4, 9, 25, 50] {
            let u = equilibrium_positions(&trap(n)).unwrap();
            assert!(force_balance_residual(&u) < 1e-12, "n = {n}");
            assert!(u.windows(2).all(|w| w[1] > w[0]));
            for i in 0..n {
                assert!((u[i] + u[n - 1 - i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn modes_have_com_on_top_and_rocking_for_two() {
        let t = trap(2);
        let modes = transverse_modes(&equilibrium_positions(&t).unwrap(), &t).unwrap();
        assert!((modes.frequencies[0] - t.f_com).abs() < 1e-6);
        let rocking = (t.f_com.powi(2) - t.f_z.powi(2)).sqrt();
        assert!((modes.frequencies[1] - rocking).abs() < 1e-6);

        let t = trap(25);
        let modes = transverse_modes(&equilibrium_positions(&t).unwrap(), &t).unwrap();
        assert!((modes.frequencies[0] - t.f_com).abs() < 1e-6);
        let c = 1.0 / 5.0;
        assert!((0..25).all(|i| (modes.participation(i, 0) - c).abs() < 1e-10));
        assert!(modes.orthonormality_error() < 1e-10);
        assert!(modes.frequencies.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn zigzag_is_reported() {
        let t = TrapConfig::new(25, 0.5e6, 0.34e6).unwrap();
        let err = transverse_modes(&equilibrium_positions(&t).unwrap(), &t).unwrap_err();
        assert!(matches!(err, Error::UnstableMode { .. }));
    }

    #[test]
    fn single_mode_truncation_is_uniform() {
        let t = trap(5);
        let mut modes = transverse_modes(&equilibrium_positions(&t).unwrap(), &t).unwrap();
        modes.frequencies.truncate(1);
        modes.vectors = modes.vectors.columns(0, 1).into_owned();
        let raman = RamanConfig::experiment_defaults(&t);
        let j = coupling_matrix_with_guard(&modes, &raman, 0.0).unwrap();
        let w = 2.0 * PI * t.f_com;
        let expected = raman.rabi.powi(2) * raman.recoil / (5.0 * (raman.detuning.powi(2) - w * w));
        for i in 0..5 {
            for k in 0..5 {
                if i != k {
                    assert!((j.get(i, k) - expected).abs() < 1e-12 * expected);
                }
            }
        }
    }

    #[test]
    fn calibration_hits_target_and_scales_as_sqrt() {
        let t = TrapConfig::experiment();
        let positions = equilibrium_positions(&t).unwrap();
        let modes = transverse_modes(&positions, &t).unwrap();
        let raman = RamanConfig::experiment_defaults(&t);
        let cal = calibrate_rabi(&modes, &raman, EXPERIMENT_J0).unwrap();
        let j = coupling_matrix(&modes, &cal).unwrap();
        assert!((j.j0().unwrap() / EXPERIMENT_J0 - 1.0).abs() < 1e-12);
        let cal2 = calibrate_rabi(&modes, &raman, 2.0 * EXPERIMENT_J0).unwrap();
        assert!((cal2.rabi / cal.rabi - 2.0.sqrt()).abs() < 1e-12);
        assert!(calibrate_rabi(&modes, &raman, 0.0).is_err());
    }

    #[test]
    fn experiment_couplings_positive_and_decaying() {
        let chain = ChainModel::experiment().unwrap();
        let j = &chain.couplings;
        for i in 0..25 {
            assert_eq!(j.get(i, i), 0.0);
            for k in 0..25 {
                assert_eq!(j.get(i, k), j.get(k, i));
                if i != k {
                    assert!(j.get(i, k) > 0.0);
                }
            }
        }
        let profile = j.distance_profile();
        assert!(profile.windows(2).all(|w| w[1].mean < w[0].mean));
        let approx = coupling_matrix_approx(&chain.modes, &chain.raman).unwrap();
        assert!((approx.j0().unwrap() / j.j0().unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn resonance_guard_trips() {
        let t = trap(3);
        let modes = transverse_modes(&equilibrium_positions(&t).unwrap(), &t).unwrap();
        let raman = RamanConfig {
            rabi: 2.0 * PI * 300e3,
            detuning: 2.0 * PI * (t.f_com + 100.0),
            recoil: RamanConfig::orthogonal_beam_recoil(t.ion_mass),
        };
        assert!(matches!(
            coupling_matrix(&modes, &raman),
            Err(Error::Resonance { mode: 0, .. })
        ));
        let below = RamanConfig {
            detuning: 2.0 * PI * (t.f_com - 1e3),
            ..raman
        };
        assert!(coupling_matrix(&modes, &below).is_err());
    }

    #[test]
    fn truncation_blocks() {
        let j = CouplingMatrix::from_fn(25, |i, k| (i * 100 + k) as f64).unwrap();
        assert_eq!(truncate_chain(&j, 25).unwrap(), j);
        let t = truncate_chain(&j, 19).unwrap();
        assert_eq!(t.n(), 19);
        assert_eq!(t.get(0, 1), j.get(3, 4));
        assert_eq!(t.get(18, 17), j.get(21, 20));
        assert!(matches!(
            truncate_chain(&j, 12),
            Err(Error::TruncationParity { n: 25, keep: 12 })
        ));
        let one = truncate_chain(&j, 1).unwrap();
        assert_eq!(one.get(0, 0), 0.0);
        assert_eq!(one.j0(), None);
        assert_eq!(truncate_chain_at(&j, 12, 6).unwrap().get(0, 1), j.get(6, 7));
    }

    #[test]
    fn spin_flip_probability_limits() {
        let chain = ChainModel::experiment().unwrap();
        let off = RamanConfig {
            rabi: 0.0,
            ..chain.raman
        };
        assert_eq!(spin_flip_probability(&chain.modes, &off, 3).unwrap(), 0.0);
        let p = mean_spin_flip_probability(&chain.modes, &chain.raman).unwrap();
        assert!(p > 0.007 / 1.5 && p < 0.007 * 1.5, "p = {p}");

        // Two ions under the same beams stay below a summed 10%.
        let t2 = trap(2);
        let m2 = transverse_modes(&equilibrium_positions(&t2).unwrap(), &t2).unwrap();
        let two: f64 = (0..2)
            .map(|i| spin_flip_probability(&m2, &chain.raman, i).unwrap())
            .sum();
        assert!(two < 0.1, "two-ion sum {two}");
    }
}
