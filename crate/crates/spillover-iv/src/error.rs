use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (specs, datasets, flags).
    #[error("invalid input: {0}")]
    Input(String),

    /// A population spec failed validation; the report lists every violation.
    #[error("invalid population spec: {0}")]
    InvalidSpec(String),

    /// Exhaustive enumeration refused because the group is too large.
    #[error("enumeration budget exceeded: group size {got} > {max}")]
    BudgetExceeded { got: usize, max: usize },

    /// A moment cell required by a bound has no observations.
    #[error("empty moment cell (z_own={z_own}, z_peers={z_peers})")]
    EmptyCell { z_own: u8, z_peers: u8 },

    /// Spillover bounds with multiple peers require one-sided noncompliance.
    #[error("spillover bounds with m > 1 require one-sided noncompliance: {0}")]
    OsncRequired(String),

    /// The pooled first stage is zero, so the IV estimand is undefined.
    #[error("zero first stage: E[D|Z=1] equals E[D|Z=0]")]
    ZeroFirstStage,

    #[error("csv parse error: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
