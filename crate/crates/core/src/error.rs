use thiserror::Error;

/// Errors raised by the selection, preprocessing and evaluation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("tracklet has no frames")]
    EmptyTracklet,
    #[error("invalid count {count} for {available} frames")]
    InvalidCount { count: usize, available: usize },
    #[error("a token cannot be paired with itself")]
    SelfPair,
    #[error("token index {0} appears more than once in the subset")]
    DuplicateToken(usize),
    #[error("subset is empty")]
    EmptySubset,
    #[error("index {index} out of range for {len} candidates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("exact enumeration over {n} candidates exceeds the limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("window holds {len} tokens but the window size is {window_size}")]
    WindowOverflow { len: usize, window_size: usize },
    #[error("tokens are not sorted by start time (position {position})")]
    UnsortedInput { position: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("could not place distractor {index} below the required margin after {attempts} attempts")]
    InfeasibleMargin { index: usize, attempts: usize },
    #[error("{predictions} prediction lists for {ground_truths} ground-truth moments")]
    LengthMismatch { predictions: usize, ground_truths: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
