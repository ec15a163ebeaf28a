use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The linear-programming membership oracle failed numerically. This is
    /// never used to signal "not contained".
    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error("undersampled: hit rate {hit_rate:.3e} below floor {floor:.1e}; lower the dimension")]
    Undersampled { hit_rate: f64, floor: f64 },

    #[error("net construction failed: {0}")]
    NetConstruction(String),

    /// A pipeline stage violated the inequality it is supposed to certify.
    #[error("stage `{stage}` failed: {message}")]
    Contract { stage: &'static str, message: String },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
