use thiserror::Error;

use crate::model::FieldState;

/// Errors raised by the numerical routines.
///
/// Variants are grouped by cause so callers (the CLI in particular) can map
/// them onto exit codes: [`RmbError::is_numerical`] separates failures of a
/// computation from bad inputs.
#[derive(Debug, Error)]
pub enum RmbError {
    #[error("sign out of range: {0} (expected -1 or +1)")]
    SignOutOfRange(i64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("use lax-verify convention; no time-evolution form (c = 0)")]
    NoTimeEvolution,

    #[error("reduction undefined: {0}")]
    ReductionUndefined(&'static str),

    #[error("blow-up at t={time}")]
    BlowUp {
        time: f64,
        last_good: Box<FieldState>,
    },

    #[error("non-finite state at t={time}: {what}")]
    NonFinite { time: f64, what: String },

    #[error("off-sheet data: {0}")]
    OffSheet(String),

    #[error("degenerate polynomial: {0}")]
    DegeneratePolynomial(String),

    #[error("root verification failed: residual {residual:e} exceeds {bound:e}")]
    RootVerification { residual: f64, bound: f64 },

    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("no vanishing-background bright soliton; use kink solver")]
    NoBrightSoliton,

    #[error("inconsistent travelling wave: P-equation residual {0:e}")]
    InconsistentTravellingWave(f64),

    #[error("solitons not separated: overlap {0:e}")]
    NotSeparated(f64),

    #[error("peak ambiguity at t={time}: found {found} peaks, expected {expected}")]
    PeakAmbiguity {
        time: f64,
        found: usize,
        expected: usize,
    },

    #[error("tracking failed: {0}")]
    Tracking(String),

    #[error("newton did not converge in {iterations} iterations (last residual {residual:e})")]
    NewtonNoConvergence { iterations: usize, residual: f64 },

    #[error("spectral pole: lambda={re}{im:+}i is within {distance:e} of a pole")]
    SpectralPole { re: f64, im: f64, distance: f64 },

    #[error("patch too small: {0}")]
    PatchTooSmall(String),

    #[error("choose better spread samples (condition number {0:e})")]
    IllConditioned(f64),
}

impl RmbError {
    /// True for failures of a computation on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            RmbError::BlowUp { .. }
                | RmbError::NonFinite { .. }
                | RmbError::RootVerification { .. }
                | RmbError::EigenNoConvergence(_)
                | RmbError::InconsistentTravellingWave(_)
                | RmbError::PeakAmbiguity { .. }
                | RmbError::Tracking(_)
                | RmbError::NewtonNoConvergence { .. }
                | RmbError::IllConditioned(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, RmbError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> RmbError {
    RmbError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
