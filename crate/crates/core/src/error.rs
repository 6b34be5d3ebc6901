use alloc::string::String;

/// Everything that can go wrong inside the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("equilibrium solve did not converge after {iterations} iterations (residual {residual:e})")]
    EquilibriumNotConverged { iterations: usize, residual: f64 },

    #[error("linear chain unstable: transverse mode {mode} has squared frequency {squared:e} (zig-zag)")]
    UnstableMode { mode: usize, squared: f64 },

    #[error("detuning within guard band of mode {mode}: |mu - omega_m| = {gap:e} rad/s, guard {guard:e} rad/s")]
    Resonance { mode: usize, gap: f64, guard: f64 },

    #[error("truncating {n} spins to {keep} needs an explicit offset (N - keep is odd)")]
    TruncationParity { n: usize, keep: usize },

    #[error("coupling scale j0 is undefined for a single spin")]
    UndefinedJ0,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("state norm drifted to {norm} (tolerance 1e-9)")]
    NormDrift { norm: f64 },

    #[error("Krylov propagation failed to converge: residual estimate {residual:e} after {substeps} substeps")]
    KrylovNotConverged { residual: f64, substeps: usize },

    #[error("dense oracle refused: {n} spins exceeds the limit of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("energy density requires b_z = 0, got {b_z}")]
    NonZeroBz { b_z: f64 },

    #[error("not enough records for a fit: need {needed}, have {have}")]
    TooFewPoints { needed: usize, have: usize },

    #[error("signal changes sign at record {index}, before a usable fit window")]
    SignIndefinite { index: usize },

    #[error("no interior maximum in peak data")]
    NoPeak,

    #[error("fit did not converge after {iterations} iterations")]
    FitNotConverged { iterations: usize },

    #[error("heat-capacity peak not bracketed by the beta grid: {hint}")]
    PeakNotBracketed { hint: String },

    #[error("checkpoint decode failed: {0}")]
    Checkpoint(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
