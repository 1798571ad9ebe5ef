use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("incompatible fields: {0}")]
    Mismatch(String),
    #[error("reference norm is zero; relative error undefined")]
    ZeroNormReference,
    #[error("unknown id {0:?}")]
    UnknownId(String),
    #[error("reference cache: {0}")]
    Cache(String),
    #[error("missing cached reference {key} and recompute is disabled")]
    MissingReference { key: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
