use thiserror::Error;

/// Errors produced by the library.
///
/// `Input` covers malformed arguments to an operation, `Config` covers
/// parameter combinations that cannot produce a valid object (e.g. an empty
/// cylinder-length window), `Model` covers structural defects of a subshift,
/// and `Numerical` covers iteration failures with enough context to diagnose
/// them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {reason} (after {iterations} iterations, last residual {residual:e})")]
    Numerical {
        reason: String,
        iterations: usize,
        residual: f64,
    },
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
