use serde::Serialize;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{what} is not stochastic: entry {index} sums to {sum}")]
    NotStochastic {
        what: &'static str,
        index: usize,
        sum: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error(
        "successor solve is numerically singular at gamma={gamma} (residual {residual:e}); adjust gamma"
    )]
    NumericallySingular { gamma: f64, residual: f64 },

    #[error("truncated successor series diverges for gamma={0} (need gamma < 1)")]
    DivergentSeries(f64),

    #[error("{count} policies exceed the enumeration cap of {cap}")]
    ExplosionCap { count: u128, cap: u64 },

    #[error("likelihood entry {index} is not strictly positive")]
    NonPositiveLikelihood { index: usize },

    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Recoverable numerical conditions that accompany a result instead of
/// aborting it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The observation had (numerically) zero probability; the predicted
    /// prior was returned unchanged.
    ZeroEvidence { observation: usize },
    /// The successor matrix was built with gamma >= 1: the series
    /// interpretation, nonnegativity and row-sum invariants do not apply.
    DiscountAtLeastOne { gamma: f64 },
    /// A backward message dropped below 1e-300.
    Underflow { time: usize, min_value: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::ZeroEvidence { observation } => write!(
                f,
                "observation {observation} has zero probability under the model; kept the predicted prior"
            ),
            Warning::DiscountAtLeastOne { gamma } => write!(
                f,
                "gamma={gamma} >= 1: successor matrix has no occupancy interpretation; nonnegativity and row-sum invariants suspended"
            ),
            Warning::Underflow { time, min_value } => {
                write!(f, "backward message underflow at t={time} (min {min_value:e})")
            }
        }
    }
}
