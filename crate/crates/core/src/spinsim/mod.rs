//! State-vector simulation of the mixed-field long-range Ising chain.
//!
//! Basis convention: amplitude index `s` ranges over `0..2^N` and bit `i` of
//! `s` is spin `i` in the σᶻ basis, little-endian, with bit value 0 for
//! σᶻ = +1. Ion `i` of the coupling matrix is always bit `i`.
//!
//! Time evolution follows the drive's literal sign, `exp(+i t H)`.

mod checkpoint;
mod dense;
mod hamiltonian;
mod krylov;
mod state;

pub use checkpoint::{decode_checkpoint, encode_checkpoint};
pub use dense::{dense_evolve_oracle, dense_site_operator, dense_hamiltonian, dense_spectrum, DenseSpectrum, DENSE_MAX_SPINS};
pub use hamiltonian::{apply_hamiltonian, expectation, HamiltonianSpec};
pub use krylov::{krylov_propagate, KrylovOptions, Propagator, DEFAULT_TOLERANCE};
pub use state::{prepare_product_state, BlochAxis, SpinState};

pub(crate) use state::{apply_single_site, hadamard_transform};
