use thiserror::Error;

/// A configuration problem, naming the offending key where there is one.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{key} {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// The config key this error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Parse(_) => None,
            ConfigError::Missing(key) => Some(key),
            ConfigError::Invalid { key, .. } => Some(key),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown rng stream label `{0}`")]
    UnknownStream(String),
    #[error("degenerate link: transmitter and receiver coincide")]
    DegenerateLink,
    #[error("queue contract violated: {departures} departures scheduled from a queue of {queue}")]
    QueueContract { queue: usize, departures: usize },
    #[error("inconsistent learner transcript: {0}")]
    Transcript(String),
    #[error("slot {slot}: {message}")]
    Invariant { slot: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
