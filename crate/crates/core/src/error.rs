use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("insufficient precision: {0}")]
    Precision(String),
    #[error("invalid argument: {0}")]
    Domain(String),
    /// A normalizing constant hits a pole for the requested exponent.
    #[error("pole: {0}")]
    Pole(String),
    /// A symbol or profile is missing an entry the operation needs.
    #[error("coverage gap: {0}")]
    Coverage(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("non-integral multiplicity: {0}")]
    NonInteger(String),
}

pub type Result<T> = std::result::Result<T, Error>;
