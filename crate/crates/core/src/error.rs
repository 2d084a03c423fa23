use thiserror::Error;

/// Errors raised while building graphs, configuring runs, or executing them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a network needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("self-edge on node {0}")]
    SelfEdge(usize),

    #[error("duplicate edge {receiver} <- {sender}")]
    DuplicateEdge { receiver: usize, sender: usize },

    #[error("node {node} out of range 1..={n}")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("digraph is not strongly connected")]
    NotStronglyConnected,

    #[error("invalid priorities for node {node}: {reason}")]
    InvalidPriorities { node: usize, reason: String },

    #[error("invalid probabilities for node {node}: {reason}")]
    InvalidProbabilities { node: usize, reason: String },

    #[error("invalid edge probability {0}, expected a value in [0, 1]")]
    InvalidEdgeProbability(f64),

    #[error("expected {expected} initial values, got {got}")]
    ValueCount { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of checked arithmetic during a run.
    pub fn is_runtime(&self) -> bool {
        matches!(self, Error::Overflow(_) | Error::Io(_))
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
