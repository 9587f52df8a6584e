use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("singular innovation matrix at pseudo-time {lambda}")]
    SingularInnovation { lambda: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("state coincides with receiver {receiver}; TDOA Jacobian undefined")]
    ReceiverSingularity { receiver: usize },

    #[error("flow map not invertible at step {step} (|det| = {det:e})")]
    InvertibilityViolation { step: usize, det: f64 },

    #[error("non-finite message in data association at iteration {iteration}")]
    NonFiniteMessage { iteration: usize },

    #[error("association row {row} has zero total mass")]
    DegenerateRow { row: usize },

    #[error("weights sum to zero; cannot resample")]
    DegenerateWeights,

    #[error("invalid belief: {0}")]
    InvalidBelief(&'static str),

    #[error("empty table")]
    EmptyTable,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
