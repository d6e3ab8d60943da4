use thiserror::Error;

use crate::linop::Vector;

/// Errors raised by the solver library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("symmetric eigensolver did not converge for {0}")]
    EigenNonConvergence(String),

    #[error("singular value decomposition did not converge for {0}")]
    SvdNonConvergence(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("Banach lemma hypothesis violated: ||B - I|| = {distance} >= 1")]
    BanachHypothesis { distance: f64 },

    #[error("certificate infeasible ({reason}); margin {margin}")]
    CertificateInfeasible { reason: String, margin: f64 },

    #[error("{what} = {value} is outside the admissible domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("misuse: {0}")]
    Misuse(String),

    /// The symmetric part of a linearization is not positive definite, so
    /// the Newton step is not guaranteed to exist or be unique.
    #[error("well-definedness failure: symmetric part of {context} is not positive definite (lambda_min = {lambda_min})")]
    NotPositive { context: String, lambda_min: f64 },

    #[error("{method} did not converge after {iterations} iterations (residual {residual}{})",
        rho.map(|r| format!(", contraction estimate {r}")).unwrap_or_default())]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
        best: Vector,
        rho: Option<f64>,
    },

    #[error("degenerate affine problem: {consistent} consistent active-set patterns (expected exactly one){}",
        if patterns.is_empty() { String::new() } else { format!(": {}", patterns.join(", ")) })]
    Degenerate {
        consistent: usize,
        patterns: Vec<String>,
    },

    #[error("dimension {n} exceeds the limit {max} for {what}")]
    TooLarge {
        what: &'static str,
        n: usize,
        max: usize,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
