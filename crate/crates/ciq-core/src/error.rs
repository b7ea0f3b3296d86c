use thiserror::Error;

/// Errors shared by every module in the crate.
///
/// Variants carry static context only; rich, path-qualified messages are the
/// CLI crate's job.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    /// A vector had the wrong length for the operation.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A NaN or infinity reached a numeric kernel.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A stateful estimator was queried before it saw enough data.
    #[error("{0} is not initialized")]
    Uninitialized(&'static str),

    /// A serialized parameter blob failed validation.
    #[error("malformed parameter blob: {0}")]
    Malformed(&'static str),

    /// A classifier dataset contains only one class.
    #[error("dataset contains a single label class")]
    SingleClass,

    /// A metric was asked to aggregate zero steps.
    #[error("empty recording")]
    EmptyRecording,

    /// An environment was stepped after reporting `done`.
    #[error("environment stepped after termination")]
    EpisodeOver,
}
