use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not Hermitian (max |H - H^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("time {t} s lies outside the sequence window [0, {end}] s")]
    OutsideWindow { t: f64, end: f64 },

    #[error("noise path has {got} samples; need r*{steps} + 1 for an integer r >= 1")]
    InsufficientSampling { got: usize, steps: usize },

    #[error("rotary echo responds only to odd harmonics, got m = {0}")]
    EvenHarmonic(i64),

    #[error("field at {omega} rad/s is not detectable (W = {weight:e}, Phi = {penalty})")]
    NotDetectable { omega: f64, weight: f64, penalty: f64 },

    #[error("main peak not bracketed: {0}")]
    PeakNotBracketed(String),

    #[error("unknown readout axis {0:?} (expected auto, x, y or z)")]
    UnknownReadout(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for failures of a numerical procedure on valid input, as opposed
    /// to rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotDetectable { .. } | Error::PeakNotBracketed(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and > 0, got {value}")))
    }
}
