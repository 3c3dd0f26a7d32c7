use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("grid node {x} coincides with partition point {p} (choose a different n)")]
    NodeOnPartition { x: f64, p: f64 },

    #[error("matrix is numerically singular (pivot {pivot:.3e} below threshold)")]
    Singular { pivot: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("branch violation: V(x) - lambda crosses the cut (-inf, 0] near x = {x}")]
    BranchCut { x: f64 },

    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
