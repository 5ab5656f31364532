use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid parameter {name} = {value}: {reason}")]
    Param {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("non-finite integrand at node {node:?}")]
    NonFinite { node: Vec<f64> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular covariance: {0}")]
    Singular(String),

    #[error("budget exceeded: {what} needs {needed}, limit {limit}")]
    Budget {
        what: &'static str,
        needed: usize,
        limit: usize,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, value: f64, reason: impl Into<String>) -> Error {
    Error::Param {
        name,
        value,
        reason: reason.into(),
    }
}
