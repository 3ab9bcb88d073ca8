use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("row {row} of the stochastic matrix sums to {sum}, expected 1")]
    NonStochasticMatrix { row: usize, sum: f64 },

    #[error("negative or non-finite entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("invalid probability vector: {0}")]
    InvalidBelief(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("the source chain is not irreducible")]
    NotIrreducible,

    #[error("the source chain is not irreducible and aperiodic")]
    NotIrreducibleAperiodic,

    #[error("action space of {count} quantizers exceeds the cap of {cap}")]
    ActionSpaceTooLarge { count: f64, cap: usize },

    #[error("channel symbol {symbol} has zero probability under the current belief")]
    ZeroProbabilitySymbol { symbol: usize },

    #[error("discount factor {0} outside (0, 1)")]
    InvalidDiscount(f64),

    #[error("no convergence after {iterations} iterations (last span/update {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("belief tree of size {size} exceeds the cap of {cap}")]
    TreeTooLarge { size: f64, cap: usize },

    #[error("oracle search space of {size:e} encoder tables exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: f64, cap: f64 },

    #[error("incomplete oracle table at stage {stage}: expected {expected} entries, found {found}")]
    IncompleteTable {
        stage: usize,
        expected: usize,
        found: usize,
    },

    #[error("encoder and decoder beliefs diverged at step {step}")]
    BeliefDesync { step: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
