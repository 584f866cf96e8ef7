use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("pruning disconnects the output; largest feasible threshold is {max_feasible}")]
    PruneTooAggressive { max_feasible: f64 },
    #[error("training diverged at step {step}: non-finite loss")]
    Diverged { step: usize },
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("operator {0} cannot be fitted: every grid cell violates its domain")]
    UnfittableOperator(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
