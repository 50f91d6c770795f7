use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("level {id} is not part of this level space")]
    LevelNotInSpace { id: u64 },

    #[error("invalid level parameters for family `{family}`: {reason}")]
    InvalidLevel { family: String, reason: String },

    #[error("probability distribution does not sum to 1 (sum = {sum})")]
    InvalidDistribution { sum: f64 },

    #[error("non-finite value encountered: {context}")]
    NonFinite { context: String },

    #[error("enumeration budget exceeded after {nodes} nodes (budget {budget})")]
    BudgetExceeded { nodes: usize, budget: usize },

    #[error("strategy enumeration budget exceeded: {keys} free keys x {actions} actions")]
    StrategyBudgetExceeded { keys: usize, actions: usize },

    #[error("solver did not converge within {iterations} iterations (last duality gap {gap})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("nothing to refine: the free level set is empty")]
    NothingToRefine,

    #[error("refinement stalled: adversary support added no new level at step {step}")]
    RefinementStalled { step: usize },

    #[error("empty buffer: cannot sample replay level")]
    EmptyBuffer,

    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("level generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
