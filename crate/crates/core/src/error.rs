use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("coefficient is not positive at x = {x} (value {value})")]
    NonPositiveCoefficient { x: f64, value: f64 },

    #[error("kernel horizon {needed} exceeds available signal horizon {available}; extend the wave run")]
    HorizonTooShort { needed: f64, available: f64 },

    #[error("hypothesis (LB) fails numerically: mu = {0:e}")]
    LowerBoundFails(f64),

    #[error("not enough usable data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
