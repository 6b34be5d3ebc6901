use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};

pub(crate) const NORM_TOL: f64 = 1e-9;

/// Direction on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochAxis {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochAxis {
    pub const PLUS_X: Self = Self::new(1.0, 0.0, 0.0);
    pub const MINUS_X: Self = Self::new(-1.0, 0.0, 0.0);
    pub const PLUS_Y: Self = Self::new(0.0, 1.0, 0.0);
    pub const PLUS_Z: Self = Self::new(0.0, 0.0, 1.0);
    pub const MINUS_Z: Self = Self::new(0.0, 0.0, -1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Spinor (a, b) with a|0⟩ + b|1⟩ pointing along this axis.
    fn spinor(&self) -> [Complex64; 2] {
        if self.z <= -1.0 + 1e-15 {
            return [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        }
        let a = ((1.0 + self.z) / 2.0).sqrt();
        let denom = (2.0 * (1.0 + self.z)).sqrt();
        [
            Complex64::new(a, 0.0),
            Complex64::new(self.x / denom, self.y / denom),
        ]
    }
}

/// Normalised pure state of N spins-1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    n: usize,
    amps: Vec<Complex64>,
}

impl SpinState {
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1usize << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                actual: amps.len(),
            });
        }
        let state = Self { n, amps };
        state.check_norm()?;
        Ok(state)
    }

    /// Normalises `amps` first; for building random test states.
    pub fn normalized(n: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        let norm = l2(&amps);
        if !(norm > 0.0) {
            return Err(invalid("amplitudes", "zero vector"));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Self::from_amplitudes(n, amps)
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = alloc::vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { n, amps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        l2(&self.amps)
    }

    pub fn check_norm(&self) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NormDrift { norm });
        }
        Ok(())
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &SpinState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |⟨self|other⟩|², insensitive to global phase.
    pub fn fidelity(&self, other: &SpinState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// ‖self − other‖.
    pub fn distance(&self, other: &SpinState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Tensor product of single-spin pure states, one axis per site.
pub fn prepare_product_state(axes: &[BlochAxis]) -> Result<SpinState> {
    if axes.is_empty() {
        return Err(invalid("axes", "need at least one site"));
    }
    for axis in axes {
        if (axis.norm() - 1.0).abs() > 1e-9 {
            return Err(invalid("axes", "directions must be unit vectors"));
        }
    }
    let n = axes.len();
    let spinors: Vec<[Complex64; 2]> = axes.iter().map(BlochAxis::spinor).collect();
    let amps = (0..1usize << n)
        .map(|s| {
            spinors
                .iter()
                .enumerate()
                .fold(Complex64::new(1.0, 0.0), |acc, (i, c)| acc * c[(s >> i) & 1])
        })
        .collect();
    Ok(SpinState { n, amps })
}

/// Applies the 2×2 matrix `u` (row-major, basis |0⟩,|1⟩) to spin `site`.
pub(crate) fn apply_single_site(amps: &mut [Complex64], site: usize, u: &[[Complex64; 2]; 2]) {
    let stride = 1usize << site;
    for block in amps.chunks_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = u[0][0] * x + u[0][1] * y;
            *b = u[1][0] * x + u[1][1] * y;
        }
    }
}

/// Normalised Walsh–Hadamard transform over all spins; maps σᶻ-basis to
/// σˣ-basis amplitudes and is its own inverse.
pub(crate) fn hadamard_transform(amps: &mut [Complex64]) {
    let dim = amps.len();
    let mut stride = 1;
    while stride < dim {
        for block in amps.chunks_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        stride *= 2;
    }
    let scale = 1.0 / (dim as f64).sqrt();
    amps.iter_mut().for_each(|a| *a *= scale);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarized_x_is_uniform() {
        let s = prepare_product_state(&[BlochAxis::PLUS_X; 4]).unwrap();
        for a in s.amplitudes() {
            assert!((a - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn polarized_z_is_basis_zero() {
        let s = prepare_product_state(&[BlochAxis::PLUS_Z; 3]).unwrap();
        assert_eq!(s, SpinState::basis(3, 0));
        let down = prepare_product_state(&[BlochAxis::MINUS_Z; 3]).unwrap();
        assert_eq!(down, SpinState::basis(3, 7));
    }

    #[test]
    fn rejects_non_unit_axes() {
        assert!(prepare_product_state(&[BlochAxis::new(1.0, 1.0, 0.0)]).is_err());
    }

    #[test]
    fn hadamard_is_involution_and_maps_plus_x_to_basis() {
        let mut v: Vec<Complex64> = prepare_product_state(&[BlochAxis::PLUS_X; 3])
            .unwrap()
            .into_amplitudes();
        hadamard_transform(&mut v);
        assert!((v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        hadamard_transform(&mut v);
        assert!((v[5] - Complex64::new(1.0 / 8.0.sqrt(), 0.0)).norm() < 1e-15);
    }
}
