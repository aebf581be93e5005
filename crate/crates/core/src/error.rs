//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong in the library, grouped by failure class so
/// callers (in particular the CLI) can map errors onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Richardson comparison between two node counts exceeded the requested
    /// absolute tolerance.
    #[error("quadrature did not converge: refinement delta {delta:.3e} exceeds abs_tol {abs_tol:.3e}")]
    QuadratureNotConverged { delta: f64, abs_tol: f64 },

    /// No sign change found in the calibration bracket.
    #[error("calibration bracket [{lo:.6e}, {hi:.6e}] does not straddle the target density {p}")]
    BracketFailure { lo: f64, hi: f64, p: f64 },

    /// Root finder ran out of iterations.
    #[error("calibration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// A closed-form bound was requested outside the regime where the theory
    /// asserts it.
    #[error("bound not asserted for this regime: {0}")]
    RegimeError(String),

    /// Invalid argument to a deterministic bound evaluator.
    #[error("domain error: {0}")]
    DomainError(String),

    /// A tail-check grid point lies outside the lemma's validity range.
    #[error("t-grid violates the lemma's validity range: {0}")]
    GridError(String),

    /// The 2x2 conditional covariance stayed non-positive-definite even after
    /// regularization.
    #[error("Cholesky failed on conditional covariance (x_norm2={x_norm2:.3e}, y_norm2={y_norm2:.3e}, xy={xy:.3e})")]
    CholeskyFailure { x_norm2: f64, y_norm2: f64, xy: f64 },

    /// Latent matrix would exceed the configured memory cap.
    #[error("resource cap exceeded: n*d = {requested} entries, cap is {cap}")]
    ResourceCap { requested: u64, cap: u64 },

    /// Latent state and model parameters disagree on dimensions.
    #[error("dimension mismatch: latents are {latent_n}x{latent_d}, params expect {want_n}x{want_d}")]
    DimensionMismatch {
        latent_n: usize,
        latent_d: usize,
        want_n: usize,
        want_d: usize,
    },

    /// Threshold sampling needs a quantile evaluator.
    #[error("connection spec does not expose a quantile function")]
    MissingQuantile,

    /// Construction of a connection spec from user input failed.
    #[error("invalid connection spec: {0}")]
    InvalidSpec(String),

    /// Graph file IO / format problems.
    #[error("graph format error: {0}")]
    GraphFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether this error is a numerical failure (exit code 2 in the CLI) as
    /// opposed to a usage error (1) or a resource refusal (3).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNotConverged { .. }
                | Error::BracketFailure { .. }
                | Error::NonConvergence { .. }
                | Error::RegimeError(_)
                | Error::DomainError(_)
                | Error::GridError(_)
                | Error::CholeskyFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
