use thiserror::Error;

/// Failures raised by the library. The CLI maps each variant to an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("hypothesis violated: {requirement}")]
    Hypothesis { requirement: String },

    #[error("precision budget exceeded: need {needed} bits, cap is {cap}")]
    PrecisionBudget { needed: u64, cap: u64 },

    #[error("unstable computation: {context}; last two widths gave {previous} and {last}")]
    Unstable {
        context: String,
        previous: String,
        last: String,
    },

    #[error("level {level} out of range (depth {depth})")]
    LevelOutOfRange { level: u32, depth: u32 },

    #[error("point is not in the set: {0}")]
    NotInSet(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("magnitude outside the representable exponent range: {0}")]
    Range(String),

    #[error("{0} did not converge")]
    NoConvergence(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
