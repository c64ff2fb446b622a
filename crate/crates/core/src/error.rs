use thiserror::Error;

/// Errors raised by evaluation, configuration and the optimizers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("evaluation budget exhausted ({limit} evaluations)")]
    BudgetExhausted { limit: u64 },

    #[error("function `{function}` returned a non-finite value")]
    NonFiniteResult { function: String },

    #[error("non-finite argument component at index {index}")]
    NonFiniteArgument { index: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("missing required configuration key `{0}`")]
    MissingConfig(String),

    #[error("configuration key `{key}` has type {actual}, expected {expected}")]
    ConfigTypeError {
        key: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("optimizer is running; parameters cannot change until minimize returns")]
    OptimizerBusy,

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("search direction is not a descent direction (g.d = {0})")]
    NotDescentDirection(f64),

    #[error("line search failed after {0} trial steps")]
    LineSearchFailed(usize),

    #[error("island {0} became empty")]
    DegeneratePopulation(usize),

    #[error("distributed evaluation failed: {0}")]
    DistributedEvalFailed(String),

    #[error("barrier broken")]
    BrokenBarrier,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
