use thiserror::Error;

/// Errors raised by the solvers and analyses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("steady coherence denominator vanishes (|den| = {magnitude:e}) at nbar = {nbar}")]
    DegenerateDenominator { nbar: f64, magnitude: f64 },

    #[error("steady-state polynomial is identically zero; no isolated fixed point")]
    NoFixedPoint,

    #[error("state left the finite range at t = {t}")]
    NonFinite { t: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("state dimension {found} does not match {expected} qubits")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("N·p = {product} is not an integer (N = {n_qubits}, p = {p}); round p first")]
    NonIntegerSplit {
        n_qubits: usize,
        p: f64,
        product: f64,
    },

    #[error("exact solver limited to {max} qubits, got {n_qubits}")]
    TooLarge { n_qubits: usize, max: usize },

    #[error("density matrix lost physicality at t = {t}: {reason}")]
    NonPhysical { t: f64, reason: String },

    #[error("correlated (cumulant) equations require zero dissipative coupling, got V = {v}")]
    RequiresZeroV { v: f64 },

    #[error("discriminant is non-negative on all of [0, 1]; no bistable interval")]
    NoBistability,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
