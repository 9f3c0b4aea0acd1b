use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid {nx}x{ny} is too coarse (need at least 4 cells per axis)")]
    GridTooCoarse { nx: usize, ny: usize },

    #[error("size mismatch: expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("non-finite value {value} at cell {cell}")]
    NonFiniteField { cell: usize, value: f64 },

    #[error("non-finite state at step {step}, cell {cell} ({value})")]
    NonFiniteState { step: usize, cell: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step {step}: dt = {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { step: usize, dt: f64, limit: f64 },

    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),

    #[error("configuration rejected:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error("ensemble failed: {failed} of {total} paths failed (first: {first})")]
    EnsembleFailed {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteState { .. } | Error::CflViolation { .. } | Error::EnsembleFailed { .. }
        )
    }

    /// Attaches a time-step index to errors raised by a single step.
    pub fn at_step(self, step: usize) -> Error {
        match self {
            Error::NonFiniteField { cell, value } | Error::NonFiniteState { cell, value, .. } => {
                Error::NonFiniteState { step, cell, value }
            }
            Error::CflViolation { dt, limit, .. } => Error::CflViolation { step, dt, limit },
            other => other,
        }
    }
}
