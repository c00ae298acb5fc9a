use std::fmt;

use crate::feedback::{FeedbackKind, Outcome};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("model index {index} out of range for {models} models")]
    IndexOutOfRange { index: usize, models: usize },
    #[error("a model cannot be compared with itself (index {0})")]
    SameModel(usize),
    #[error("outcome {outcome:?} is not supported by the {kind} model")]
    UnsupportedOutcome {
        kind: FeedbackKind,
        outcome: Outcome,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error("{}", fmt_parse(*.line, .message))]
    Parse {
        line: Option<usize>,
        message: String,
    },
    #[error("no leaderboard for prompt: {0}")]
    MissingLeaderboard(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("comparison graph is disconnected; components: {}", fmt_components(.components))]
    NonIdentifiable { components: Vec<Vec<String>> },
    #[error("budget {budget} is below the cheapest model cost {min_cost}")]
    Infeasible { budget: f64, min_cost: f64 },
    #[error("training diverged at step {step}: {message}")]
    Diverged { step: usize, message: String },
    #[error("remote provider: {0}")]
    Remote(#[from] RemoteError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Failures of the remote coefficient provider. Each is a separate kind so
/// callers can map them to distinct responses.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RemoteError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server answered with status {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("response has {found} coefficients, catalog has {expected} models")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("response names model `{0}` which is not in the catalog")]
    UnknownModel(String),
}

impl Error {
    pub(crate) fn parse(line: Option<usize>, message: impl fmt::Display) -> Self {
        Error::Parse {
            line,
            message: message.to_string(),
        }
    }
}

fn fmt_parse(line: Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("parse error on line {l}: {message}"),
        None => format!("parse error: {message}"),
    }
}

fn fmt_components(components: &[Vec<String>]) -> String {
    components
        .iter()
        .map(|c| format!("[{}]", c.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}
