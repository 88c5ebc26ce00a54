use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("damage value {value} outside [0, 1]")]
    DamageDomain { value: f64 },

    #[error("index {index} out of range for length {len}")]
    OutOfBounds { index: usize, len: usize },

    #[error("inconsistent projection bounds at element {element}: lower {lower} > upper {upper}")]
    Projection { element: usize, lower: f64, upper: f64 },

    #[error("numerical failure at step {step}: {what}")]
    Numerical { step: u64, what: String },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
