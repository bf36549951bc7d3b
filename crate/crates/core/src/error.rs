//! Error type shared by all modules of the crate.

use crate::optimizer::OptimizerReport;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument that must be finite was NaN or infinite.
    #[error("non-finite input: {name} = {value}")]
    NonFinite { name: &'static str, value: f64 },

    /// A parameter violated its documented domain (sign, range, consistency).
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// An operation that needs |r| < 1 received a degenerate correlation.
    #[error("correlation r = {0} is degenerate here (|r| must be < 1)")]
    DegenerateCorrelation(f64),

    /// Grid construction or grid/parameter consistency failure.
    #[error("grid configuration: {0}")]
    GridConfig(String),

    /// The descent produced a non-finite Lagrangian. The report carries the
    /// last finite iterate so the caller can inspect how far it got.
    #[error("optimizer diverged at iteration {iter} (non-finite Lagrangian)")]
    Diverged {
        iter: usize,
        last: Box<OptimizerReport>,
    },

    /// A mapping/decoder file could not be parsed; names the file and line.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
