//! Error type shared by all numerical modules.

use alloc::string::String;
use alloc::vec::Vec;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    /// Invalid input values (NaN, negative counts, empty sets, bad ranges).
    #[error("invalid input: {0}")]
    Input(String),

    /// Evaluation point outside the basis domain.
    #[error("domain error: point {point} outside [{lo}, {hi}]")]
    Domain { point: f64, lo: f64, hi: f64 },

    /// Dimension mismatch between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Linear system is singular or not positive definite.
    #[error("rank error: {0}")]
    Rank(String),

    /// Operation not supported for the given configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Keyed join failed; lists the keys absent from the other side.
    #[error("keyed join error: missing units {missing:?}")]
    KeyedJoin { missing: Vec<String> },

    /// Iterative solver failed to converge within its sweep budget.
    #[error("no convergence after {sweeps} sweeps (duality gap {gap:.3e})")]
    NoConvergence { sweeps: usize, gap: f64 },
}

impl CoreError {
    pub fn input(msg: impl Into<String>) -> Self {
        CoreError::Input(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        CoreError::Shape(msg.into())
    }

    pub fn rank(msg: impl Into<String>) -> Self {
        CoreError::Rank(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        CoreError::Unsupported(msg.into())
    }
}
