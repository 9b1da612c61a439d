use std::path::PathBuf;

use thiserror::Error;

use crate::growth::LogisticParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("{0}")]
    Validation(String),

    #[error("least-squares fit did not converge (best residual {residual:.3e})")]
    NoConvergence { best: LogisticParams, residual: f64 },

    #[error("no sigmoid signal: observations are flat")]
    NoSigmoidSignal,

    #[error("error metric undefined: target {0} is zero")]
    ZeroTarget(&'static str),

    #[error("empty candidate restriction")]
    EmptyRestriction,

    #[error("{scheme} scheme refused: stability margin {margin:.6} is negative")]
    StabilityViolated { scheme: &'static str, margin: f64 },

    #[error("invariant `{check}` violated at (i={i}, j={j}): {detail}")]
    InvariantViolation {
        check: &'static str,
        i: usize,
        j: usize,
        detail: String,
    },

    #[error("{path}:{line}: {msg}")]
    Config {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("missing key {0}")]
    MissingKey(String),

    #[error("{path}: row {row}: {msg}")]
    Csv { path: PathBuf, row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvariantViolation { .. } => 2,
            _ => 1,
        }
    }
}

pub(crate) fn ensure_finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(name))
    }
}
