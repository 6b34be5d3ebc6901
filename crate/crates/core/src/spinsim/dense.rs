//! Explicit 2^N × 2^N matrices built from Kronecker products of Pauli
//! matrices. Used as an oracle for the matrix-free kernels, so nothing here
//! shares code with them.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use super::hamiltonian::HamiltonianSpec;
use super::state::SpinState;
use crate::error::{Error, Result};

/// Largest chain the dense oracle accepts.
pub const DENSE_MAX_SPINS: usize = 12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli(axis: usize) -> DMatrix<Complex64> {
    let z = c(0.0, 0.0);
    match axis {
        0 => DMatrix::from_row_slice(2, 2, &[z, c(1.0, 0.0), c(1.0, 0.0), z]),
        1 => DMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        _ => DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), z, z, c(-1.0, 0.0)]),
    }
}

/// Pauli `axis` (0 = x, 1 = y, 2 = z) on `site`, identity elsewhere. Site 0 is
/// the least significant bit, so it is the rightmost Kronecker factor.
pub fn dense_site_operator(n: usize, site: usize, axis: usize) -> DMatrix<Complex64> {
    let mut op = DMatrix::<Complex64>::identity(1, 1);
    for k in (0..n).rev() {
        let factor = if k == site {
            pauli(axis)
        } else {
            DMatrix::identity(2, 2)
        };
        op = op.kronecker(&factor);
    }
    op
}

fn check_size(n: usize) -> Result<()> {
    if n > DENSE_MAX_SPINS {
        return Err(Error::TooLarge {
            n,
            max: DENSE_MAX_SPINS,
        });
    }
    Ok(())
}

/// The full Hamiltonian matrix in the σᶻ product basis.
pub fn dense_hamiltonian(spec: &HamiltonianSpec) -> Result<DMatrix<Complex64>> {
    let n = spec.n();
    check_size(n)?;
    let dim = 1usize << n;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    let xs: Vec<DMatrix<Complex64>> = (0..n).map(|i| dense_site_operator(n, i, 0)).collect();
    let j = spec.couplings();
    for i in 0..n {
        for k in (i + 1)..n {
            let coupling = spec.envelope * spec.j_scale * j.get(i, k);
            if coupling != 0.0 {
                h += (&xs[i] * &xs[k]) * c(coupling, 0.0);
            }
        }
        if spec.b_y != 0.0 {
            h += dense_site_operator(n, i, 1) * c(spec.envelope * spec.b_y, 0.0);
        }
        if spec.b_z != 0.0 {
            h += dense_site_operator(n, i, 2) * c(spec.envelope * spec.b_z, 0.0);
        }
    }
    Ok(h)
}

/// Eigen-decomposition of a dense Hamiltonian, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Column k is the eigenvector of `eigenvalues[k]`.
    pub vectors: DMatrix<Complex64>,
}

impl DenseSpectrum {
    /// exp(+i t H)|ψ⟩.
    pub fn evolve(&self, state: &SpinState, t: f64) -> Result<SpinState> {
        let psi = DVector::from_column_slice(state.amplitudes());
        let mut coeffs = self.vectors.adjoint() * psi;
        for (k, a) in coeffs.iter_mut().enumerate() {
            let (s, cs) = (self.eigenvalues[k] * t).sin_cos();
            *a *= c(cs, s);
        }
        let out = &self.vectors * coeffs;
        SpinState::from_amplitudes(state.n(), out.iter().copied().collect())
    }

    /// Canonical average of the Hamiltonian at inverse temperature `beta`.
    pub fn thermal_energy(&self, beta: f64) -> f64 {
        let e0 = self.eigenvalues[0];
        let (mut z, mut e) = (0.0, 0.0);
        for &l in &self.eigenvalues {
            let w = (-beta * (l - e0)).exp();
            z += w;
            e += w * l;
        }
        e / z
    }

    /// β²(⟨E²⟩ − ⟨E⟩²).
    pub fn heat_capacity(&self, beta: f64) -> f64 {
        let e0 = self.eigenvalues[0];
        let (mut z, mut e, mut e2) = (0.0, 0.0, 0.0);
        for &l in &self.eigenvalues {
            let w = (-beta * (l - e0)).exp();
            z += w;
            e += w * l;
            e2 += w * l * l;
        }
        let mean = e / z;
        beta * beta * (e2 / z - mean * mean)
    }
}

pub fn dense_spectrum(spec: &HamiltonianSpec) -> Result<DenseSpectrum> {
    let h = dense_hamiltonian(spec)?;
    let eig = SymmetricEigen::new(h);
    let dim = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(dim, dim, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(DenseSpectrum {
        eigenvalues,
        vectors,
    })
}

/// exp(+i t H)|ψ⟩ by full diagonalisation; refuses chains above [`DENSE_MAX_SPINS`].
pub fn dense_evolve_oracle(state: &SpinState, spec: &HamiltonianSpec, t: f64) -> Result<SpinState> {
    check_size(spec.n())?;
    if state.n() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            actual: state.n(),
        });
    }
    dense_spectrum(spec)?.evolve(state, t)
}
