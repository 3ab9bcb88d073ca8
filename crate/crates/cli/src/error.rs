use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const CAP_EXCEEDED: i32 = 3;
    pub const NO_CONVERGENCE: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] zdq::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use zdq::Error as E;
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Core(e) => match e {
                E::TreeTooLarge { .. } | E::SearchSpaceTooLarge { .. } | E::ActionSpaceTooLarge { .. } => {
                    exit::CAP_EXCEEDED
                }
                E::NoConvergence { .. } => exit::NO_CONVERGENCE,
                E::NonStochasticMatrix { .. }
                | E::NegativeEntry { .. }
                | E::InvalidBelief(_)
                | E::DimensionMismatch { .. }
                | E::NotIrreducible
                | E::NotIrreducibleAperiodic
                | E::InvalidDiscount(_)
                | E::InvalidArgument(_) => exit::CONFIG,
                E::ZeroProbabilitySymbol { .. } | E::IncompleteTable { .. } | E::BeliefDesync { .. } => {
                    exit::FAILURE
                }
            },
            CliError::Io { .. } | CliError::CheckFailed(_) => exit::FAILURE,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        let cap = CliError::from(zdq::Error::TreeTooLarge { size: 1e9, cap: 10 });
        assert_eq!(cap.exit_code(), 3);
        let nc = CliError::from(zdq::Error::NoConvergence {
            iterations: 1,
            residual: 1.0,
        });
        assert_eq!(nc.exit_code(), 4);
        assert_eq!(CliError::CheckFailed("gap".into()).exit_code(), 1);
    }
}
