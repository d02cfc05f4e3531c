use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Fock dimension {dim} (need at least 2)")]
    InvalidDimension { dim: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("truncation: |{what}|^2 = {value:.4} exceeds the safe limit {limit:.4} for this cutoff")]
    Truncation { what: &'static str, value: f64, limit: f64 },

    #[error("phase-space grid reaches |alpha|^2 = {value:.4}, beyond the validated domain {limit:.4}")]
    TruncationDomain { value: f64, limit: f64 },

    #[error("undefined state: {0}")]
    UndefinedState(&'static str),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("steady state is not unique (conditioning ratio {ratio:.3e})")]
    DegenerateSteadyState { ratio: f64 },

    #[error("cutoff not converged: {quantity} drifted by {drift:.3e} (tolerance {tol:.1e})")]
    NoConvergence {
        quantity: &'static str,
        drift: f64,
        tol: f64,
    },

    #[error("generator is numerically defective (eigenvector condition number {condition:.3e}); exceptional point?")]
    ExceptionalPoint { condition: f64 },

    #[error("top eigenvalue {eigenvalue} is degenerate across spectrum indices {indices:?}")]
    DegenerateTop { eigenvalue: Complex64, indices: Vec<usize> },

    #[error("generator has no parity structure")]
    MissingParity,

    #[error("eigenmatrix cannot be normalized to a density matrix (trace {trace:.3e})")]
    NonNormalizable { trace: f64 },

    #[error("state is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error(
        "pure-state unraveling requires eta = 1, n_th = 0 and no extra channels; use the stochastic master equation"
    )]
    UseSme,

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("trace collapsed to {trace:.3e} at t = {t}")]
    TraceCollapse { t: f64, trace: f64 },

    #[error("trajectories do not share a common time grid")]
    GridMismatch,

    #[error("no inter-jump segment decays over two decades")]
    InsufficientDecay,

    #[error("trajectory carries no reference distances")]
    MissingReference,

    #[error("no admissible parameter point")]
    EmptyAdmissibleSet,

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
