//! Experiment harness for `sr_aif`: episode runs with JSON reports, benchmark
//! sweeps written as CSV, matrix and value-field dumps, and the duality
//! verification suite.
//!
//! Every command is a plain function returning serializable data so that it
//! can be driven from tests as well as from the `sr-aif` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod checks;
pub mod config;
pub mod dump;
pub mod format;
pub mod run;

pub use config::{load_config, resolve, AgentKind, ConfigOverrides, RunConfig};

use thiserror::Error;

pub const TOOL_NAME: &str = "sr-aif";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{0}")]
    Numerical(#[from] sr_aif::Error),

    #[error("unknown field `{0}` (expected one of: {fields})", fields = dump::FIELDS.join(", "))]
    UnknownField(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl HarnessError {
    /// 0 success, 1 configuration or usage, 2 numerical failure, 3 failed check.
    pub fn exit_code(&self) -> i32 {
        use sr_aif::Error as E;
        match self {
            HarnessError::Numerical(E::InvalidSpec(_) | E::ExplosionCap { .. } | E::InvalidArgument(_)) => 1,
            HarnessError::Numerical(_) => 2,
            HarnessError::CheckFailed(_) => 3,
            HarnessError::Config { .. }
            | HarnessError::UnknownField(_)
            | HarnessError::Io(_)
            | HarnessError::Csv(_)
            | HarnessError::Json(_) => 1,
        }
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Human-readable description of [`derive_seed`], echoed into reports.
pub const SEED_DERIVATION: &str =
    "splitmix64: seed(i) = mix(master_seed + (i + 1) * 0x9E3779B97F4A7C15), wrapping arithmetic";

/// Seed of episode `index`: the `index + 1`-th output of a SplitMix64 stream
/// started at `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
