use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use super::hamiltonian::HamiltonianSpec;
use super::state::{hadamard_transform, l2, SpinState};
use crate::error::{invalid, Error, Result};

/// Default per-step error tolerance on the propagated state vector.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Bound on ‖ψ_exact − ψ_krylov‖ per call.
    pub tolerance: f64,
    /// Largest Lanczos subspace before a step is split in half.
    pub max_dim: usize,
    /// Give up once a step would need more substeps than this.
    pub max_substeps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_dim: 30,
            max_substeps: 1 << 16,
        }
    }
}

/// Lanczos propagator for exp(+i t H)|ψ⟩ with reusable workspace.
///
/// The a-posteriori error estimate is β_{m+1}·|e_mᵀ exp(i t T_m) e₁|; a step
/// whose subspace hits `max_dim` without meeting the tolerance is retried as
/// two half steps.
#[derive(Debug, Clone)]
pub struct Propagator {
    options: KrylovOptions,
    basis: Vec<Vec<Complex64>>,
    work: Vec<Complex64>,
    /// Learned value of t·‖H‖ a single Lanczos step can cover.
    reach: f64,
    matvecs: u64,
}

impl Default for Propagator {
    fn default() -> Self {
        Self::new(KrylovOptions::default())
    }
}

impl Propagator {
    pub fn new(options: KrylovOptions) -> Self {
        Self {
            options,
            basis: Vec::new(),
            work: Vec::new(),
            reach: 0.6 * options.max_dim as f64,
            matvecs: 0,
        }
    }

    pub fn options(&self) -> &KrylovOptions {
        &self.options
    }

    /// Number of Hamiltonian applications performed so far.
    pub fn matvecs(&self) -> u64 {
        self.matvecs
    }

    /// Replaces `state` with exp(+i·duration·H)|state⟩.
    pub fn propagate(&mut self, state: &mut SpinState, spec: &HamiltonianSpec, duration: f64) -> Result<()> {
        if state.n() != spec.n() {
            return Err(Error::DimensionMismatch {
                expected: spec.n(),
                actual: state.n(),
            });
        }
        if duration == 0.0 {
            return Ok(());
        }
        let amps = state.amplitudes_mut();
        hadamard_transform(amps);
        let result = self.propagate_x_basis(amps, spec, duration);
        hadamard_transform(amps);
        result?;
        state.check_norm()
    }

    /// Same as [`Propagator::propagate`] for amplitudes already in the σˣ basis.
    pub(crate) fn propagate_x_basis(
        &mut self,
        amps: &mut [Complex64],
        spec: &HamiltonianSpec,
        duration: f64,
    ) -> Result<()> {
        if !(duration >= 0.0) {
            return Err(invalid("duration", "must be non-negative"));
        }
        if duration == 0.0 {
            return Ok(());
        }
        let scale = duration * spec.norm_bound();
        if scale == 0.0 {
            return Ok(());
        }
        let dim = amps.len();
        if self.work.len() != dim {
            self.work = alloc::vec![Complex64::new(0.0, 0.0); dim];
            self.basis.clear();
        }
        while self.basis.len() < self.options.max_dim + 1 {
            self.basis.push(alloc::vec![Complex64::new(0.0, 0.0); dim]);
        }

        let mut substeps = ((scale / self.reach).ceil() as usize).max(1);
        let backup = amps.to_vec();
        loop {
            let dt = duration / substeps as f64;
            let mut worst = 0.0f64;
            let mut failed = false;
            let mut largest_dim = 0;
            for _ in 0..substeps {
                match self.lanczos_step(amps, spec, dt) {
                    Ok(used) => largest_dim = largest_dim.max(used),
                    Err(residual) => {
                        worst = residual;
                        failed = true;
                        break;
                    }
                }
            }
            if !failed {
                let per_step = scale / substeps as f64;
                if largest_dim * 4 < self.options.max_dim * 3 {
                    self.reach = self.reach.max(per_step * 1.25);
                }
                return Ok(());
            }
            amps.copy_from_slice(&backup);
            self.reach = (scale / substeps as f64) / 2.0;
            substeps *= 2;
            if substeps > self.options.max_substeps {
                return Err(Error::KrylovNotConverged {
                    residual: worst,
                    substeps: substeps / 2,
                });
            }
        }
    }

    /// One Lanczos step; returns the subspace size used or the residual estimate on failure.
    fn lanczos_step(
        &mut self,
        amps: &mut [Complex64],
        spec: &HamiltonianSpec,
        dt: f64,
    ) -> core::result::Result<usize, f64> {
        let beta0 = l2(amps);
        if beta0 == 0.0 {
            return Ok(0);
        }
        let inv = 1.0 / beta0;
        for (q, a) in self.basis[0].iter_mut().zip(amps.iter()) {
            *q = a * inv;
        }
        let mut alphas: Vec<f64> = Vec::with_capacity(self.options.max_dim);
        let mut betas: Vec<f64> = Vec::with_capacity(self.options.max_dim);
        let breakdown = 1e-13 * spec.norm_bound().max(1e-300);
        let mut residual = f64::INFINITY;

        for k in 0..self.options.max_dim {
            spec.apply_x_basis(&self.basis[k], &mut self.work);
            self.matvecs += 1;
            let alpha: f64 = self.basis[k]
                .iter()
                .zip(&self.work)
                .map(|(q, w)| (q.conj() * w).re)
                .sum();
            alphas.push(alpha);
            for (w, q) in self.work.iter_mut().zip(&self.basis[k]) {
                *w -= q * alpha;
            }
            if k > 0 {
                let b = betas[k - 1];
                for (w, q) in self.work.iter_mut().zip(&self.basis[k - 1]) {
                    *w -= q * b;
                }
            }
            // One pass of full reorthogonalisation keeps the basis orthonormal
            // to round-off over long runs.
            for j in 0..=k {
                let c: Complex64 = self.basis[j]
                    .iter()
                    .zip(&self.work)
                    .map(|(q, w)| q.conj() * w)
                    .sum();
                for (w, q) in self.work.iter_mut().zip(&self.basis[j]) {
                    *w -= q * c;
                }
            }
            let beta = l2(&self.work);

            let coeffs = exp_tridiagonal(&alphas, &betas, dt);
            let last = coeffs[k].norm();
            residual = beta0 * beta * last;
            if residual < self.options.tolerance || beta < breakdown {
                let used = k + 1;
                amps.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
                for (j, c) in coeffs.iter().enumerate() {
                    let c = c * beta0;
                    for (a, q) in amps.iter_mut().zip(&self.basis[j]) {
                        *a += q * c;
                    }
                }
                return Ok(used);
            }
            betas.push(beta);
            let inv = 1.0 / beta;
            for (q, w) in self.basis[k + 1].iter_mut().zip(&self.work) {
                *q = w * inv;
            }
        }
        Err(residual)
    }
}

/// exp(+i t T) e₁ for the symmetric tridiagonal T with diagonal `alphas` and
/// off-diagonal `betas` (one shorter, or equal length with the last ignored).
fn exp_tridiagonal(alphas: &[f64], betas: &[f64], t: f64) -> Vec<Complex64> {
    let m = alphas.len();
    let mut tri = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        tri[(i, i)] = alphas[i];
        if i + 1 < m {
            tri[(i, i + 1)] = betas[i];
            tri[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(tri);
    let phases: Vec<Complex64> = (0..m)
        .map(|l| {
            let (s, c) = (eig.eigenvalues[l] * t).sin_cos();
            Complex64::new(c, s) * eig.eigenvectors[(0, l)]
        })
        .collect();
    (0..m)
        .map(|j| {
            (0..m)
                .map(|l| phases[l] * eig.eigenvectors[(j, l)])
                .sum()
        })
        .collect()
}

/// exp(+i·duration·H)|ψ⟩ to within `tolerance` in vector norm.
pub fn krylov_propagate(
    state: &SpinState,
    spec: &HamiltonianSpec,
    duration: f64,
    tolerance: f64,
) -> Result<SpinState> {
    let mut out = state.clone();
    let mut prop = Propagator::new(KrylovOptions {
        tolerance,
        ..KrylovOptions::default()
    });
    prop.propagate(&mut out, spec, duration)?;
    Ok(out)
}
