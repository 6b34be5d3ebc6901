use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use super::state::{hadamard_transform, SpinState};
use crate::error::{Error, Result};
use crate::ionchain::CouplingMatrix;

/// Coupling matrix plus its Ising energies tabulated in the σˣ basis.
#[derive(Debug)]
struct IsingKernel {
    couplings: CouplingMatrix,
    xx_diag: Vec<f64>,
    xx_radius: f64,
}

impl IsingKernel {
    fn new(couplings: CouplingMatrix) -> Self {
        let n = couplings.n();
        let mut xx_diag = alloc::vec![0.0; 1 << n];
        // D[s | bit] follows from D[s] by flipping spin i.
        xx_diag[0] = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| couplings.get(i, j))
            .sum();
        for i in 0..n {
            let bit = 1usize << i;
            for s in 0..bit {
                // Spins above `i` are still +1 in s; flipping i negates its bonds.
                let mut field = 0.0;
                for j in 0..n {
                    if j != i {
                        let zj = if (s >> j) & 1 == 1 { -1.0 } else { 1.0 };
                        field += couplings.get(i, j) * zj;
                    }
                }
                xx_diag[s | bit] = xx_diag[s] - 2.0 * field;
            }
        }
        let xx_radius = xx_diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        Self {
            couplings,
            xx_diag,
            xx_radius,
        }
    }
}

/// H = s(t)·[ j_scale Σ_{i<j} J_ij σᵢˣσⱼˣ + b_y Σ σᵢʸ + b_z Σ σᵢᶻ ].
///
/// Cloning shares the tabulated coupling kernel, so re-parameterised copies
/// (noise, envelopes) are cheap.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    kernel: Arc<IsingKernel>,
    /// Multiplicative factor on every J_ij.
    pub j_scale: f64,
    pub b_y: f64,
    pub b_z: f64,
    /// Global amplitude envelope factor.
    pub envelope: f64,
}

impl PartialEq for HamiltonianSpec {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.kernel, &other.kernel) || self.kernel.couplings == other.kernel.couplings)
            && self.j_scale == other.j_scale
            && self.b_y == other.b_y
            && self.b_z == other.b_z
            && self.envelope == other.envelope
    }
}

impl HamiltonianSpec {
    pub fn new(couplings: CouplingMatrix, b_y: f64, b_z: f64) -> Self {
        Self {
            kernel: Arc::new(IsingKernel::new(couplings)),
            j_scale: 1.0,
            b_y,
            b_z,
            envelope: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.kernel.couplings.n()
    }

    pub fn couplings(&self) -> &CouplingMatrix {
        &self.kernel.couplings
    }

    /// Same couplings with different fields.
    pub fn with_fields(&self, b_y: f64, b_z: f64) -> Self {
        Self {
            b_y,
            b_z,
            ..self.clone()
        }
    }

    pub fn with_envelope(&self, envelope: f64) -> Self {
        Self {
            envelope,
            ..self.clone()
        }
    }

    /// Shares the coupling table with `other`, so equality is a cheap check.
    pub fn shares_couplings(&self, other: &HamiltonianSpec) -> bool {
        Arc::ptr_eq(&self.kernel, &other.kernel)
    }

    /// Upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let field = (self.b_y * self.b_y + self.b_z * self.b_z).sqrt();
        self.envelope.abs()
            * (self.j_scale.abs() * self.kernel.xx_radius + self.n() as f64 * field)
    }

    /// out = H·input with both vectors in the σˣ basis.
    pub(crate) fn apply_x_basis(&self, input: &[Complex64], out: &mut [Complex64]) {
        let jd = self.envelope * self.j_scale;
        for ((o, x), d) in out.iter_mut().zip(input).zip(&self.kernel.xx_diag) {
            *o = x * (jd * d);
        }
        if self.b_y == 0.0 && self.b_z == 0.0 {
            return;
        }
        // σᶻ → bit flip and σʸ → −σʸ under the basis change.
        let c0 = Complex64::new(self.b_z, self.b_y) * self.envelope;
        let c1 = c0.conj();
        for site in 0..self.n() {
            let stride = 1usize << site;
            for (ob, ib) in out.chunks_mut(2 * stride).zip(input.chunks(2 * stride)) {
                let (olo, ohi) = ob.split_at_mut(stride);
                let (ilo, ihi) = ib.split_at(stride);
                for k in 0..stride {
                    olo[k] += c0 * ihi[k];
                    ohi[k] += c1 * ilo[k];
                }
            }
        }
    }
}

/// H|ψ⟩ without building the 2^N × 2^N matrix; the image is not normalised.
pub fn apply_hamiltonian(state: &SpinState, spec: &HamiltonianSpec) -> Result<Vec<Complex64>> {
    apply_to_amplitudes(state.amplitudes(), spec)
}

pub(crate) fn apply_to_amplitudes(amps: &[Complex64], spec: &HamiltonianSpec) -> Result<Vec<Complex64>> {
    if amps.len() != 1usize << spec.n() {
        return Err(Error::DimensionMismatch {
            expected: 1 << spec.n(),
            actual: amps.len(),
        });
    }
    let mut x = amps.to_vec();
    hadamard_transform(&mut x);
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); x.len()];
    spec.apply_x_basis(&x, &mut out);
    hadamard_transform(&mut out);
    Ok(out)
}

/// ⟨ψ|H|ψ⟩.
pub fn expectation(state: &SpinState, spec: &HamiltonianSpec) -> Result<f64> {
    let h = apply_hamiltonian(state, spec)?;
    Ok(state
        .amplitudes()
        .iter()
        .zip(&h)
        .map(|(a, b)| (a.conj() * b).re)
        .sum())
}
