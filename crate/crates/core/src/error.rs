use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Some cumulative gain is zero, so no finite source power reaches that hop.
    #[error("infeasible channel: cumulative gain at hop {hop} is {value}")]
    DegenerateChannel { hop: usize, value: f64 },

    #[error("hop index {index} out of range 1..={max}")]
    HopOutOfRange { index: usize, max: usize },

    #[error("relay-count formula is undefined for a per-hop gain of exactly 1")]
    UnitHopGain,

    #[error("distributed dissemination stalled: relay {relay} has a zero PS ratio")]
    ZeroRatio { relay: usize },

    #[error("grid search over {points:.3e} points exceeds the limit of {limit:.0e}")]
    GridTooLarge { points: f64, limit: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
