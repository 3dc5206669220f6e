//! Error type shared across the core modules.

use thiserror::Error;

/// Errors produced by the core numerics, estimators, and policies.
#[derive(Debug, Clone, Error)]
pub enum CabError {
    /// A vector or matrix had the wrong dimension for the operation.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// The Newton solver failed to reach the gradient tolerance.
    #[error(
        "estimator did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})"
    )]
    NonConvergence { iterations: usize, grad_norm: f64 },

    /// Cholesky factorization failed: the matrix is not positive definite.
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// A configuration or call parameter was outside its valid range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Brute-force enumeration was requested on an instance that is too large.
    #[error("instance has {size} allocations, exceeding the enumeration limit of {limit}")]
    InstanceTooLarge { size: u128, limit: u128 },

    /// A selection distribution row summed to a non-positive value.
    #[error("selection distribution for user {user} has non-positive row sum {row_sum:.3e}")]
    DegenerateDistribution { user: usize, row_sum: f64 },
}

impl CabError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        CabError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
