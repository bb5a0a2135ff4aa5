use thiserror::Error;

/// Errors raised by the signal chain, the equalizers and the experiment drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid PRBS seed {0:#x}: must be a nonzero 15-bit value")]
    InvalidSeed(u32),

    #[error("odd bit count {0}: PAM4 mapping consumes bit pairs")]
    OddBitCount(usize),

    #[error("invalid roll-off {0}: must lie in (0, 1]")]
    InvalidRolloff(f64),

    #[error("invalid filter span {0}: must be a positive even number of symbols")]
    InvalidSpan(usize),

    #[error("invalid samples-per-symbol {sps}: need at least {min}")]
    InvalidSps { sps: usize, min: usize },

    #[error("filter has no taps")]
    EmptyFilter,

    #[error("invalid normalized bandwidth {f3db_norm}: must lie in (0, {max})")]
    InvalidBandwidth { f3db_norm: f64, max: f64 },

    #[error("timing offset {offset} outside [0, {sps})")]
    InvalidTimingOffset { offset: usize, sps: usize },

    #[error("saturation level must be positive and finite, got {0}")]
    InvalidSaturation(f64),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("sequence too short: {0}")]
    TooShort(String),

    #[error("degenerate training set: no examples of level {0}")]
    DegenerateTrainingSet(u8),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid tap configuration: {0}")]
    InvalidTaps(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),

    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
