use thiserror::Error;

use crate::rates::PowerAllocation;
use crate::solver::KktResidual;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate channel: {link} on subcarrier {subcarrier} has zero norm")]
    DegenerateChannel { link: &'static str, subcarrier: usize },

    #[error("anchor is not strictly feasible: {0}")]
    InfeasibleAnchor(String),

    #[error("inner solver stopped after {iterations} iterations with residual {residual}")]
    InnerNotConverged {
        iterations: usize,
        residual: KktResidual,
        best: Box<PowerAllocation>,
    },

    #[error("outer iteration {iteration}: {source}")]
    Outer {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal consistency: {0}")]
    Inconsistent(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
