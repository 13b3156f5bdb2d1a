//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Result`]. Variants are
//! grouped by the stage that raises them: linear algebra, model validation,
//! parameter derivation, runtime supervision, and I/O or config handling.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library and CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// Tridiagonal elimination hit a pivot below the singularity threshold.
    #[error("tridiagonal solve: zero pivot at row {index} (|pivot| = {pivot:.3e})")]
    ZeroPivot { index: usize, pivot: f64 },

    /// Two objects that must share a spatial grid do not.
    #[error("grid mismatch: {left} vs {right} nodes")]
    GridMismatch { left: usize, right: usize },

    /// The plant violates the well-posedness condition q > max(lambda)/(2 eps) + theta1/2.
    #[error("plant assumption violated: {0}")]
    AssumptionViolated(String),

    /// Kernel solver iteration failed to contract.
    #[error("kernel solver did not converge: {0}")]
    NoConvergence(String),

    /// sigma outside the open interval (0, 1).
    #[error("sigma must lie strictly inside (0, 1), got {0}")]
    BadSigma(f64),

    /// The (B, kappa) feasibility inequality failed.
    #[error("(B, kappa) infeasible: margin = {margin:.6e} (needs > 0)")]
    InvalidBKappa { margin: f64 },

    /// Derived decay constant b came out non-positive.
    #[error("derived b = {0:.6e} is not positive; upstream validation inconsistent")]
    NonPositiveB(f64),

    /// Sampling period exceeds the minimal dwell time.
    #[error("sampling period h = {h:.6e} exceeds minimal dwell time tau = {tau:.6e}")]
    HTooLarge { h: f64, tau: f64 },

    /// eta exceeds the admissible bound 2b/B.
    #[error("eta = {eta:.6e} exceeds admissible bound 2b/B = {limit:.6e}")]
    EtaTooLarge { eta: f64, limit: f64 },

    /// Dynamic trigger variable m lost positivity.
    #[error("trigger variable m = {m:.6e} is not positive")]
    NonPositiveM { m: f64 },

    /// Plant time step failed in the linear solver.
    #[error("plant step failed: {0}")]
    SolverFailure(String),

    /// Periodic trigger consulted between sampling instants.
    #[error("periodic trigger checked off-grid: t = {t:.9e} is not a multiple of h = {h:.9e}")]
    OffGridCall { t: f64, h: f64 },

    /// Self-triggered policy requested with max(lambda) = 0.
    #[error("self-triggered dwell formula undefined for max(lambda) = 0")]
    LambdaZero,

    /// Lyapunov value exceeded the exponential performance barrier.
    #[error("performance barrier breached at t = {t:.6}: V = {v:.6e} > {barrier:.6e}")]
    BarrierBreach { t: f64, v: f64, barrier: f64 },

    /// Event log too short for dwell statistics.
    #[error("event log holds fewer than two events; no dwell intervals to aggregate")]
    EmptyLog,

    /// Config file is syntactically malformed.
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    /// Config or input value violates a documented invariant.
    #[error("invalid value: {0}")]
    ValidationError(String),

    /// Filesystem or stream failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
