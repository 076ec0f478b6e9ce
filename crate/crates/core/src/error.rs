use thiserror::Error;

/// Errors raised by the numerical layers and the report pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("composition diverges: |phi(0)| = {0} >= 1")]
    DivergentComposition(f64),
    #[error("logarithm of a series with vanishing constant term")]
    LogAtZero,
    #[error("reciprocal of a series with vanishing constant term")]
    DivisionByZero,
    #[error("ill-conditioned computation: {0}")]
    IllConditioned(String),

    #[error("invalid fixed points: {0}")]
    InvalidFixedPoints(String),
    #[error("invalid multiplier {0}: expected a value in (0, 1)")]
    InvalidMultiplier(f64),
    #[error("map is not a disk automorphism: {0}")]
    NotAutomorphism(String),
    #[error("automorphism is not hyperbolic ({0})")]
    NotHyperbolic(String),

    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("bad call to `{name}`: {msg}")]
    Arity { name: String, msg: String },
    #[error("weight is not invertible: {0}")]
    NotInvertible(String),
    #[error("weight vanishes on the circle |z| = {0}")]
    ZeroOnCircle(f64),

    #[error("unsupported exponent p = {0}; only p = 2 is supported here")]
    UnsupportedExponent(f64),
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("series diverging after {terms} terms (last term norm {last_norm:e})")]
    SeriesDiverging { terms: usize, last_norm: f64 },
    #[error("eigenvalue solver failed: {0}")]
    EigSolverFailure(String),
    #[error("no eigenvector found: {0}")]
    NoEigenvectorFound(String),
    #[error("surjectivity probe failed; best residual {best_residual:e}")]
    ProbeFailed { best_residual: f64 },

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
