use nalgebra::DVector;
use num_complex::Complex64;
use pdtc_core::ionchain::CouplingMatrix;
use pdtc_core::spinsim::*;
use pdtc_core::Error;
use proptest::prelude::*;

fn power_law(n: usize, alpha: f64) -> CouplingMatrix {
    CouplingMatrix::from_fn(n, |i, k| 1.0 / ((k as f64 - i as f64).abs()).powf(alpha)).unwrap()
}

fn pseudo_random_state(n: usize, seed: u64) -> SpinState {
    // Small LCG; only needs to be deterministic and unstructured.
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let amps = (0..1usize << n).map(|_| Complex64::new(next(), next())).collect();
    SpinState::normalized(n, amps).unwrap()
}

#[test]
fn matvec_matches_dense_matrix() {
    for n in 1..=6 {
        let spec = HamiltonianSpec::new(power_law(n, 1.1), 0.37, -0.81);
        let h = dense_hamiltonian(&spec).unwrap();
        let psi = pseudo_random_state(n, n as u64);
        let fast = apply_hamiltonian(&psi, &spec).unwrap();
        let slow = &h * DVector::from_column_slice(psi.amplitudes());
        let err: f64 = fast.iter().zip(slow.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-12, "n={n} err={err}");
    }
}

#[test]
fn dense_hamiltonian_is_hermitian() {
    let spec = HamiltonianSpec::new(power_law(5, 0.9), 1.3, 0.4);
    let h = dense_hamiltonian(&spec).unwrap();
    assert!((&h - h.adjoint()).norm() < 1e-14);
}

#[test]
fn krylov_matches_dense_oracle() {
    for n in [2, 5, 8] {
        let spec = HamiltonianSpec::new(power_law(n, 1.0), 0.6, 0.3);
        let psi = pseudo_random_state(n, 11 + n as u64);
        for t in [0.05, 1.0, 7.3] {
            let fast = krylov_propagate(&psi, &spec, t, 1e-11).unwrap();
            let exact = dense_evolve_oracle(&psi, &spec, t).unwrap();
            let d = fast.distance(&exact);
            assert!(d < 1e-9, "n={n} t={t} d={d}");
        }
    }
}

#[test]
fn dense_oracle_accepts_negative_time_and_inverts() {
    let spec = HamiltonianSpec::new(power_law(4, 1.2), 0.5, 0.0);
    let psi = pseudo_random_state(4, 3);
    let fwd = dense_evolve_oracle(&psi, &spec, 2.5).unwrap();
    let back = dense_evolve_oracle(&fwd, &spec, -2.5).unwrap();
    assert!(back.distance(&psi) < 1e-12);
}

#[test]
fn krylov_rejects_negative_duration() {
    let spec = HamiltonianSpec::new(power_law(3, 1.0), 0.5, 0.0);
    let psi = pseudo_random_state(3, 1);
    assert!(krylov_propagate(&psi, &spec, -1.0, 1e-9).is_err());
}

#[test]
fn single_spin_precesses_at_twice_the_field() {
    // exp(i t B σʸ)|↑⟩ gives ⟨σᶻ⟩ = cos(2Bt).
    let spec = HamiltonianSpec::new(CouplingMatrix::from_fn(1, |_, _| 0.0).unwrap(), 0.9, 0.0);
    let up = SpinState::basis(1, 0);
    for t in [0.1, 0.7, 2.0, 5.5] {
        let s = krylov_propagate(&up, &spec, t, 1e-12).unwrap();
        let a = s.amplitudes();
        let sz = a[0].norm_sqr() - a[1].norm_sqr();
        assert!((sz - (2.0 * 0.9 * t).cos()).abs() < 1e-10);
    }
}

#[test]
fn energy_and_norm_are_conserved() {
    let spec = HamiltonianSpec::new(power_law(10, 1.0), 0.4, 0.25);
    let mut psi = prepare_product_state(&[BlochAxis::PLUS_Z; 10]).unwrap();
    let e0 = expectation(&psi, &spec).unwrap();
    let mut prop = Propagator::default();
    for _ in 0..20 {
        prop.propagate(&mut psi, &spec, 0.5).unwrap();
    }
    assert!((psi.norm() - 1.0).abs() < 1e-10);
    assert!((expectation(&psi, &spec).unwrap() - e0).abs() < 1e-7);
}

#[test]
fn dense_refuses_large_chains() {
    let spec = HamiltonianSpec::new(power_law(13, 1.0), 0.0, 0.0);
    let psi = SpinState::basis(13, 0);
    assert!(matches!(dense_evolve_oracle(&psi, &spec, 1.0), Err(Error::TooLarge { .. })));
}

#[test]
fn dimension_mismatch_is_reported() {
    let spec = HamiltonianSpec::new(power_law(3, 1.0), 0.5, 0.0);
    let psi = SpinState::basis(4, 0);
    assert!(matches!(apply_hamiltonian(&psi, &spec), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let psi = pseudo_random_state(6, 99);
    let bytes = encode_checkpoint(&psi);
    assert_eq!(bytes.len(), 16 + 16 * 64);
    assert_eq!(decode_checkpoint(&bytes).unwrap(), psi);
    assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn spectrum_thermal_limits() {
    let spec = HamiltonianSpec::new(power_law(4, 1.0), 0.7, 0.0);
    let sp = dense_spectrum(&spec).unwrap();
    let trace: f64 = sp.eigenvalues.iter().sum::<f64>() / 16.0;
    assert!((sp.thermal_energy(0.0) - trace).abs() < 1e-12);
    assert!((sp.thermal_energy(200.0) - sp.eigenvalues[0]).abs() < 1e-6);
    assert!(sp.heat_capacity(1e-6) < 1e-9);
}

proptest! {
    #[test]
    fn hamiltonian_is_linear_and_hermitian(seed_a in 0u64..1000, seed_b in 0u64..1000, c in -2.0f64..2.0) {
        let spec = HamiltonianSpec::new(power_law(5, 1.3), 0.8, -0.2);
        let a = pseudo_random_state(5, seed_a);
        let b = pseudo_random_state(5, seed_b);
        let ha = apply_hamiltonian(&a, &spec).unwrap();
        let hb = apply_hamiltonian(&b, &spec).unwrap();
        // ⟨a|H b⟩ = conj⟨b|H a⟩
        let ahb: Complex64 = a.amplitudes().iter().zip(&hb).map(|(x, y)| x.conj() * y).sum();
        let bha: Complex64 = b.amplitudes().iter().zip(&ha).map(|(x, y)| x.conj() * y).sum();
        prop_assert!((ahb - bha.conj()).norm() < 1e-12);
        // H(a + c b) = Ha + c Hb, done on raw amplitudes via the dense matrix.
        let h = dense_hamiltonian(&spec).unwrap();
        let mix = DVector::from_iterator(32, a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x + y * c));
        let lhs = &h * mix;
        for k in 0..32 {
            prop_assert!((lhs[k] - (ha[k] + hb[k] * c)).norm() < 1e-12);
        }
    }
}
