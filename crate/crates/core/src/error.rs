use thiserror::Error;

/// Errors raised by the evaluators in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vector is not weakly increasing: {0:?}")]
    Unordered(Vec<i64>),

    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("negative-order difference requires a support bound")]
    MissingSupportBound,

    #[error("contour quadrature did not converge: {nodes} nodes, last change {change:e} exceeds {tolerance:e}")]
    QuadratureNonConvergence {
        nodes: usize,
        change: f64,
        tolerance: f64,
    },

    #[error("state space of {states} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },

    #[error("precision loss: {0}")]
    PrecisionLoss(String),

    #[error("Fredholm truncation did not converge at size {size}: last increment {increment:e}")]
    TruncationNonConvergence { size: usize, increment: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
