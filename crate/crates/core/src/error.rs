//! Error type shared by every module in the crate.

use alloc::string::String;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the transport substrate and everything built on it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration value is outside its admissible range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Input data violates a precondition (shape, range, normalization).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A kernel entry underflowed to zero in plain (multiplicative) mode.
    #[error(
        "kernel entry exp({exponent:.3e}) underflows to 0 in plain mode; \
         enable log-domain stabilization"
    )]
    NumericUnderflow {
        /// The offending exponent `-c/epsilon`.
        exponent: f64,
    },

    /// A scaling vector picked up a non-finite entry.
    #[error("scaling iteration diverged at iteration {iteration}")]
    Divergence {
        /// Iteration at which the first non-finite value appeared.
        iteration: usize,
    },

    /// The brute-force oracle failed to converge within its iteration cap.
    #[error("oracle failed to converge: change {last_change:.3e} after {iterations} iterations")]
    OracleFailure {
        /// Iterations performed before giving up.
        iterations: usize,
        /// Last observed scaling-vector change.
        last_change: f64,
    },
}
