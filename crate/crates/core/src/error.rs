//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A frequency window contains no lattice points.
    #[error("empty frequency set: {0}")]
    EmptyFrequencySet(String),

    /// Grid resolution below the stated precondition.
    #[error("insufficient resolution: {0}")]
    Resolution(String),

    /// All grid values inside the requested ball vanish.
    #[error("field vanishes on grid inside the ball")]
    FieldVanishes,

    /// Two experiments cannot be compared.
    #[error("incompatible experiments: {0}")]
    Incompatible(String),

    /// An experiment specification violates a module precondition.
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    /// A Monte Carlo replicate failed; the index is reported.
    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
