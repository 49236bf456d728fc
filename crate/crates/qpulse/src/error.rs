//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("time t = {t} outside the grid span [{t0}, {t1}]")]
    OutOfRange { t: f64, t0: f64, t1: f64 },

    #[error("mode '{shape}' not contained in the grid: tail mass {tail:.3e} exceeds {limit:.1e}")]
    TruncatedMode { shape: String, tail: f64, limit: f64 },

    #[error("integration diverged at t = {t}: trace drift {drift:.3e} (try a smaller step or tighter tolerance)")]
    IntegrationDiverged { t: f64, drift: f64 },

    #[error("numerical failure at t = {t}: {reason}")]
    NumericalFailure { t: f64, reason: String },

    #[error("insufficient Fock truncation: need at least {needed} levels, space has {actual}")]
    InsufficientTruncation { needed: usize, actual: usize },

    #[error("degenerate post-selection: outcome probability {prob:.3e} below 1e-9")]
    DegeneratePostselection { prob: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
