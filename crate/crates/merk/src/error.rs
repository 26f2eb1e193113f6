//! Error types shared across the crate.

use core::fmt;

/// Errors raised by problem evaluation, fast solves, and studies.
#[derive(Debug, Clone, PartialEq)]
pub enum MerkError {
    /// A right-hand-side evaluation produced a non-finite component.
    ProblemEvaluationDiverged {
        /// Index of the first offending component.
        index: usize,
    },
    /// The fast (micro-scale) integration produced a non-finite state.
    FastSolveDiverged {
        /// Interior time `tau` within the fast interval at which the state
        /// first went non-finite.
        tau: f64,
        /// Stage index of the enclosing IVP, when stepping a multirate
        /// scheme; 0 for a raw fast solve.
        stage: usize,
    },
    /// A caller violated a documented precondition.
    ContractViolation(&'static str),
    /// Oracle operations are restricted to small dense problems.
    OracleScaleExceeded {
        dimension: usize,
        limit: usize,
    },
    /// Internal scheduling inconsistency: a polynomial table referenced a
    /// stage whose tendency difference has not been computed yet.
    SchedulingBug {
        stage: usize,
    },
    /// Too few data points survive the error floor for a rate fit.
    InsufficientData {
        surviving: usize,
    },
}

impl fmt::Display for MerkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MerkError::ProblemEvaluationDiverged { index } => {
                write!(f, "rhs evaluation produced non-finite component at index {index}")
            }
            MerkError::FastSolveDiverged { tau, stage } => {
                write!(f, "fast solve diverged at tau={tau} (stage {stage})")
            }
            MerkError::ContractViolation(what) => write!(f, "contract violation: {what}"),
            MerkError::OracleScaleExceeded { dimension, limit } => {
                write!(f, "oracle limited to dimension {limit}, got {dimension}")
            }
            MerkError::SchedulingBug { stage } => {
                write!(f, "internal scheduling bug: tendency for stage {stage} missing")
            }
            MerkError::InsufficientData { surviving } => {
                write!(f, "rate fit needs >= 2 points above the error floor, got {surviving}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MerkError {}
