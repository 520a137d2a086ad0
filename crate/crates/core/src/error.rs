use thiserror::Error;

use crate::mdp::ValidationReport;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("cannot parse {text:?} as a number")]
pub struct ScalarParseError {
    pub text: String,
}

impl ScalarParseError {
    pub fn new(text: &str) -> Self {
        Self { text: text.to_string() }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(ValidationReport),

    #[error("malformed document: {0}")]
    Document(String),

    #[error("unknown state-action pair ({state}, {action})")]
    UnknownPair { state: usize, action: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("policy does not match the MDP: {0}")]
    PolicyShape(String),

    #[error("singular linear system")]
    Singular,

    #[error("policy enumeration needs {count} evaluations, limit is {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("episode exceeded the safety cap of {cap} steps")]
    EpisodeCap { cap: usize },

    #[error("index {index} out of range for episode of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error(transparent)]
    Parse(#[from] ScalarParseError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
