use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("kernel is not even: J(x) != J(-x) at sample ({ix}, {iy})")]
    AsymmetricKernel { ix: usize, iy: usize },

    #[error("a(x) is negative at sample ({ix}, {iy}): {value}")]
    NegativeA { ix: usize, iy: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical blow-up at step {step} (t = {time}): non-finite {field}")]
    BlowUp {
        step: usize,
        time: f64,
        field: &'static str,
    },

    #[error("line search failed after {backtracks} backtracks at iteration {iteration}")]
    LineSearch { iteration: usize, backtracks: usize },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BlowUp { .. } | Error::LineSearch { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
