use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the simulator library.
///
/// Variants fall into three broad classes: malformed inputs (bad amplitudes,
/// bad lengths, bad file contents), protocol-level aborts (too few pairs to
/// sacrifice, broken correlations), and internal invariant failures that
/// indicate a bug rather than bad input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not unitary")]
    NonUnitary,
    #[error("observable is not an in-plane axis ({0})")]
    NotInPlane(&'static str),
    #[error("state norm departs from 1 beyond tolerance (norm = {0})")]
    NotNormalized(f64),
    #[error("non-finite amplitude")]
    NonFiniteAmplitude,
    #[error("invalid bit value {value} at position {index}, expected 0 or 1")]
    InvalidBit { index: usize, value: u8 },
    #[error("empty message")]
    EmptyMessage,
    #[error("key length must be at least 1")]
    EmptyKey,
    #[error("{what} has length {got}, expected {want}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        want: usize,
    },
    #[error("pair pool holds {got} pairs but {want} are required")]
    PoolTooSmall { got: usize, want: usize },
    #[error("sacrificing {got} pairs is below the minimum of {min}")]
    InsufficientSacrifice { got: usize, min: usize },
    #[error("sacrifice fraction {0} outside the open interval (0, 1)")]
    InvalidFraction(f64),
    #[error("coverage {0} outside [0, 1]")]
    InvalidCoverage(f64),
    #[error("pair {index}: correlation magnitude {magnitude} is not 1, aborting key derivation")]
    CorrelationBroken { index: usize, magnitude: f64 },
    #[error("position {index}: state is not a computational basis state (|amp1|^2 = {p1})")]
    NonBasisState { index: usize, p1: f64 },
    #[error("created state matches no channel (internal error)")]
    NoChannelMatch,
    #[error("strategy {0} does not act on individual pairs")]
    NotATamperStrategy(&'static str),
    #[error("unknown {what} name {name:?}")]
    UnknownName { what: &'static str, name: String },
    #[error("unsupported file version {got}, expected {want}")]
    VersionMismatch { got: u32, want: u32 },
    #[error("file kind {got:?}, expected {want:?}")]
    KindMismatch { got: String, want: &'static str },
    #[error("invalid field {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("gate {gate} does not realize channel {channel} (inconsistent key file)")]
    GateChannelMismatch { gate: String, channel: String },
    #[error(transparent)]
    Parse(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that indicate a bug in the simulator itself rather
    /// than bad input or a legitimate protocol abort.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::NoChannelMatch | Error::CorrelationBroken { .. }
        )
    }
}
