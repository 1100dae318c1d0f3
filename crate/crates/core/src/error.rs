use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    /// The Lyapunov operator `X ↦ AX + XA*` is not invertible.
    #[error(
        "singular Lyapunov operator: eigenvalues {lambda} and {mu} of A satisfy λ + conj(μ) ≈ 0 \
         (|λ + conj(μ)| = {gap:e}); X cannot be expressed as a function of Y. Re-center the design \
         around a fixed stabilizing gain K0 and optimize over K - K0 instead"
    )]
    SingularOperator { lambda: String, mu: String, gap: f64 },

    #[error("X(Y) is not positive definite: Y is not stabilizing")]
    InfeasibleY,

    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: &'static str },

    #[error("{what} must be Hermitian (asymmetry {asym:e})")]
    NotHermitian { what: &'static str, asym: f64 },

    #[error("input contains non-finite entries in {what}")]
    NonFinite { what: &'static str },

    #[error("pair (A, B) is not stabilizable: {0}")]
    NonStabilizable(String),

    #[error("pair (A, C) is not observable: {0}")]
    NonObservable(String),

    #[error("Schur iteration did not converge for a {0}x{0} matrix")]
    EigenNonConvergence(usize),

    #[error("sublevel bounds unavailable: {0}")]
    BoundUnavailable(String),

    #[error("backtracking exceeded {max} reductions at iteration {iter}")]
    MaxBacktracks { iter: usize, max: usize },

    #[error("polishing failed: {0}")]
    PolishInfeasible(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("outer iteration {outer}: {source}")]
    InnerSolver {
        outer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal consistency error: {0}")]
    Internal(String),
}
