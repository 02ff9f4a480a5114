use thiserror::Error;

use crate::coupling::Phase;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("uniform draw {0} outside [0, 1)")]
    UniformOutOfRange(f64),

    #[error("illegal comb step at index {index}: {from:?} -> {to:?}")]
    IllegalCombStep {
        index: usize,
        from: (i64, i64),
        to: (i64, i64),
    },

    #[error("illegal simple-walk step at index {index}")]
    IllegalWalkStep { index: usize },

    #[error("path must start at the origin")]
    NotAtOrigin,

    #[error("horizon {horizon} beyond path of length {len}")]
    HorizonOutOfRange { horizon: usize, len: usize },

    #[error("invalid reflected path at index {index}: {reason}")]
    InvalidReflectedPath { index: usize, reason: &'static str },

    #[error("coupling inputs exhausted ({input}) at step {step} during {phase:?}")]
    CouplingExhausted {
        input: &'static str,
        step: usize,
        phase: Phase,
    },

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error}")]
    QuadratureNoConvergence { estimate: f64, error: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty sample")]
    EmptySample,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
