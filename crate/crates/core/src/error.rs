use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mode count {count} exceeds the limit of {limit}")]
    ModeLimit { count: usize, limit: usize },
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    /// The wave functional vanishes at the evaluation point, so no phase exists.
    #[error("degenerate point: wave functional vanishes")]
    Degenerate,
    #[error("theory `{0}` has no quadratic Hamiltonian")]
    NonQuadratic(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("stability: {0}")]
    Stability(String),
    #[error("effective sample size {ess:.1} below floor {floor}")]
    VarianceExplosion { ess: f64, floor: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
