use nalgebra::DVector;
use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Slater margin is missing or too small for the violation bound to mean anything.
    #[error("slater condition not satisfied: margin {epsilon:e} is below the floor {floor:e}")]
    SlaterViolation { epsilon: f64, floor: f64 },

    #[error("missing problem constants: {0}")]
    MissingConstants(String),

    /// An iterative solver ran out of iterations. `best` is the best iterate seen.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        best: DVector<f64>,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("closed-form update requires linear constraints")]
    WrongPath,

    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),

    #[error("invalid parameters: {0}")]
    Validity(String),

    #[error("instance generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
