//! Error types shared across the library.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    /// A numerical routine failed to converge or produced an invalid value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Invalid or inconsistent model structure.
    #[error("invalid structure: {0}")]
    Structure(String),

    /// Parameter estimation cannot proceed on the given data.
    #[error("estimation failure: {0}")]
    Estimation(String),

    /// Bad run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
