use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("action {action} out of range for seat {seat} (action count {count})")]
    ActionOutOfRange { seat: usize, action: usize, count: usize },

    #[error("cannot step a terminal state (turn {turn})")]
    TerminalState { turn: u64 },

    #[error("expected a vector of length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("protocol violation: {0}")]
    Protocol(&'static str),

    #[error("training diverged at batch {batch}: mean |logit| = {mean_abs_logit}")]
    Diverged { batch: usize, mean_abs_logit: f64 },

    #[error("unsupported environment: {0}")]
    UnsupportedEnvironment(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a policy checkpoint (bad magic bytes)")]
    BadMagic,

    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),

    #[error("corrupt checkpoint: {0}")]
    Corrupt(&'static str),

    #[error("checkpoint architecture {found} does not match expected {expected}")]
    ArchitectureMismatch { expected: String, found: String },
}
