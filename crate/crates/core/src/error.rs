use thiserror::Error;

use crate::model::UserId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid user type {id}: {reason}")]
    InvalidUser { id: UserId, reason: String },

    #[error("malformed bid from user {user}: {reason}")]
    MalformedBid { user: UserId, reason: String },

    #[error("user {0} appears more than once in the book")]
    DuplicateUser(UserId),

    #[error("unknown user {0}")]
    UnknownUser(UserId),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error("metric `{metric}` is not available in {mode} mode")]
    UnknownMetric { metric: String, mode: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}
