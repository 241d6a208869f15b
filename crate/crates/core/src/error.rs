use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular within pivot tolerance")]
    SingularMatrix,
    #[error("cannot sample from a distribution with zero total weight")]
    EmptyDistribution,
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("chain does not have a unique stationary distribution")]
    NonUniqueStationary,
    #[error("instance is not mixing: {0}")]
    NotMixing(String),
    #[error("exact oracle too large: {0}")]
    OracleTooLarge(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("step bound violated on the {block} block: |eta*g| = {value}")]
    StepBoundViolation { block: &'static str, value: f64 },
    #[error("non-finite iterate on the {0} block")]
    NonFiniteIterate(&'static str),
    #[error("infeasible instance: {0}")]
    InfeasibleInstance(String),
    #[error("linear program is unbounded")]
    UnboundedProgram,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
