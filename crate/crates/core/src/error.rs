use crate::netcore::AgentId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is out of range. `key` names the offending field.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient tail: {got} points at or above the cutoff, need at least {needed}")]
    InsufficientTail { needed: usize, got: usize },

    #[error("insufficient data: {got} samples, need at least {needed}")]
    InsufficientData { needed: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed structured input. `line` is 1-based.
    #[error("{source_name}:{line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },

    /// Well-formed input whose values fail validation (non-monotone dates,
    /// nonpositive prices). `rows` are 1-based line numbers of the source.
    #[error("{source_name}: {reason} (rows {rows:?})")]
    Validation {
        source_name: String,
        reason: String,
        rows: Vec<usize>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            reason: reason.into(),
        }
    }
}
