use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("ambient group mismatch: {0}")]
    AmbientMismatch(String),
    #[error("unsupported group: {0}")]
    Unsupported(String),
    #[error("{0} is not a prime")]
    NotPrime(String),
    #[error("invalid homomorphism: {0}")]
    InvalidHomomorphism(String),
    #[error("subgroup nesting violated: {0}")]
    NestingViolated(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid antichain: {0}")]
    InvalidAntichain(String),
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("state budget of {0} exceeded")]
    BudgetExceeded(usize),
    #[error("illegal move: {0}")]
    IllegalMove(String),
    #[error("strategy error: {0}")]
    Strategy(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
