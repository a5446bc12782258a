//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error in {op}: {reason}")]
    Domain {
        /// Operation that rejected the argument.
        op: &'static str,
        /// What was wrong with it.
        reason: String,
    },

    /// A structural/configuration problem (mismatched lengths, out-of-range
    /// orders, invalid model parameters).
    #[error("config error in {op}: {reason}")]
    Config {
        /// Operation that rejected the configuration.
        op: &'static str,
        /// What was wrong with it.
        reason: String,
    },

    /// An iterative computation failed to reach its tolerance. Carries the
    /// best value obtained so far.
    #[error("{op} did not converge (partial result {partial})")]
    NonConvergence {
        /// Operation that failed to converge.
        op: &'static str,
        /// Partial result at the point of giving up.
        partial: f64,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            op,
            reason: reason.into(),
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
