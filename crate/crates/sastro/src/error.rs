//! Crate-wide error type.

use crate::estimator::EstimateResult;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Strata count has no integer q-th root.
    #[error("strata count {ell} has no integer {q}-th root")]
    InvalidStrataCount { ell: usize, q: usize },

    /// A uniform vector fell outside (0,1]^q.
    #[error("point outside the open-closed unit hypercube at coordinate {index}: {value}")]
    DomainError { index: usize, value: f64 },

    /// Degenerate truncation range (a >= b) or non-positive scale.
    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),

    /// Per-stratum sample variance needs at least two points.
    #[error("insufficient samples: need at least {need} per stratum, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    /// Schedule constants violate the regime's constraints.
    #[error("invalid sampling schedule: {0}")]
    InvalidSchedule(String),

    /// A non-finite value reached a numeric kernel.
    #[error("non-finite value in {context}: {value}")]
    NonFinite { context: &'static str, value: f64 },

    /// The adaptive rule demanded more samples than the configured cap allows.
    /// Carries the last completed estimate, if any, plus every oracle call spent.
    #[error("sample-size budget exhausted after {oracle_calls} oracle calls (cap on n: {n_cap})")]
    BudgetExhausted {
        partial: Option<EstimateResult>,
        oracle_calls: u64,
        n_cap: usize,
    },

    /// Problem or variant name not in the registry.
    #[error("unknown {kind}: {name}")]
    UnknownName { kind: &'static str, name: String },

    /// Malformed configuration or data file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Invalid argument combination.
    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
