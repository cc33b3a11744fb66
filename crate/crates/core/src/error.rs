//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular mod {p}")]
    SingularMatrix { p: u32 },

    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u32, right: u32 },

    #[error("{n} is not prime")]
    NotPrime { n: u32 },

    #[error("size {size} exceeds configured limit {limit}")]
    TooLarge { size: u64, limit: u64 },

    #[error("empty word")]
    EmptyWord,

    #[error("word is not reduced at position {position}")]
    NotReduced { position: usize },

    #[error("letter refers to generator {index} but only {count} generators were given")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("budget of {budget} exhausted after {spent} steps")]
    BudgetExceeded { budget: u64, spent: u64 },

    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("need at least {need} base elements, got {got}")]
    TooFewGenerators { need: usize, got: usize },

    #[error("covering violated: {0}")]
    CoveringViolation(String),

    #[error("H_{index} generates only {closure} of {order} elements")]
    GenerationFailure { index: usize, closure: u64, order: u64 },

    #[error("level bound {bound} misses target {target}")]
    TargetMissed { bound: f64, target: String },

    #[error("fiber masses inconsistent: {0}")]
    InconsistentCovering(String),

    #[error("level {n} carries no usable gap certificate")]
    MissingCertificate { n: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
