use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes shared by every module.
///
/// `InvalidParameter` is the only variant caused by bad input; everything else
/// reports a computation that could not be completed or failed a self-check.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("model integrity check failed: {0}")]
    ModelIntegrity(String),
    #[error("integration failed at t = {time:.6e} s: {reason}")]
    IntegrationFailure { time: f64, reason: String },
    #[error("trace drift {drift:.3e} at t = {time:.6e} s")]
    TraceDrift { time: f64, drift: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("calibration inconsistency: {0}")]
    Calibration(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True when the error stems from rejected input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. })
    }
}
