//! Error type shared by every module in the crate.

use alloc::string::String;

/// Errors surfaced by the library.
///
/// Every fallible public operation returns one of these; panics are reserved
/// for internal invariant violations on `debug_assert`ed hot paths.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Caller passed inconsistent shapes, out-of-range values, or an empty
    /// collection where a non-empty one is required.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation produced or received non-finite numbers.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// A linear system was singular without regularization; `index` is the
    /// first pivot that collapsed.
    #[error("rank-deficient system at pivot {index} (add regularization or more samples)")]
    RankDeficient { index: usize },

    /// An enumeration exceeded its configured budget.
    #[error("resource budget exceeded: {0}")]
    ResourceExceeded(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }
}
