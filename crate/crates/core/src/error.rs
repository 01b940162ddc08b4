use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("negative mass {value:e} at lattice index j = {j}")]
    Negativity { j: i64, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("moment order {k} exceeds the supported maximum {max}")]
    MomentOrder { k: u32, max: u32 },

    #[error("incompatible lattices: {0}")]
    Incompatible(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("moment projection failed: clipped mass {clipped:e} exceeds tolerance")]
    ProjectionFailure { clipped: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
