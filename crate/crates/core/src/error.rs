use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("integrand is not finite at node u = {node}")]
    NonFiniteIntegrand { node: f64 },

    #[error("quadrature did not converge (error estimate {error_estimate:e})")]
    QuadratureNotConverged { error_estimate: f64 },

    #[error("trajectory {stream_index} failed: {reason}")]
    TrajectoryFailed { stream_index: u64, reason: String },

    #[error("zero standard error with nonzero deviation {deviation:e} at time index {index}")]
    ZeroVariance { index: usize, deviation: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }
}

/// Non-fatal conditions attached to a result.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// The decay width is not small compared with the bath half-width, so the
    /// golden-rule rate is a poor description of the discretized bath.
    NarrowBand { gamma: f64, half_width: f64 },
    /// `σ²Γ/8 ≥ 1`: the stochastically corrected decay rate is not positive.
    NonPositiveRate { gamma: f64, sigma: f64 },
    /// The linearized coefficient system was requested far outside the
    /// regime where `σ‖V‖²t` is small.
    LinearizationScale { value: f64 },
    /// Small-time expansion used where the neglected terms are not small.
    ExpansionValidity { neglected: f64 },
}

/// A value together with the warnings raised while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Flagged<T> {
    pub fn clean(value: T) -> Self {
        Flagged {
            value,
            warnings: Vec::new(),
        }
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}
