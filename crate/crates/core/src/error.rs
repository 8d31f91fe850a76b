//! Error taxonomy shared by the whole crate.
//!
//! Four kinds cover every failure mode: `Config` for invalid or
//! inconsistent parameters, `Domain` for mathematically undefined requests
//! (negative time, non-positive errors in a log fit), `Shape` for
//! mismatched dimensions, and `Numeric` for non-finite values produced at
//! run time. Numeric errors carry enough context to reproduce the failure.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
