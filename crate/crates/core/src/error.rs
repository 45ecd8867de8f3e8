use thiserror::Error;

use crate::graph::{EdgeId, NodeId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // graph construction
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("node {0} is out of range")]
    NodeOutOfRange(NodeId),
    #[error("self loop at node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("directed cycle through node {0}")]
    CycleDetected(NodeId),
    #[error("node {0} is not reachable from the source")]
    UnreachableReceiver(NodeId),
    #[error("source {0} has incoming edges")]
    SourceHasInEdges(NodeId),
    #[error("grid side must be an odd integer >= 3, got {0}")]
    InvalidSide(usize),
    #[error("edge probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),

    // capacity models
    #[error("missing capacity for {0}")]
    MissingCapacity(String),
    #[error("capacity for {0} must be positive and finite, got {1}")]
    NonpositiveCapacity(String, f64),
    #[error("overlay edge {0} is not routed over any physical link")]
    UnroutedEdge(EdgeId),
    #[error("edge {0} is not covered by any capacity row")]
    UncoveredEdge(EdgeId),
    #[error("capacity row {0} references edge {1} twice or out of range")]
    InvalidRow(usize, EdgeId),
    #[error("rate of edge {0} must be finite and nonnegative, got {1}")]
    NegativeRate(EdgeId, f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    // oracles
    #[error("linear program is malformed: {0}")]
    MalformedProgram(String),
    #[error("simplex pivot breakdown: {0}")]
    NumericalFailure(String),
    #[error("brute-force cut enumeration supports at most {max} nodes, got {actual}")]
    TooLarge { max: usize, actual: usize },
    #[error("node {0} is the source and has no s-v cut")]
    SourceIsTarget(NodeId),

    // dynamics
    #[error("queue state does not match the graph's edge set")]
    KeyMismatch,
    #[error("invalid step parameters: {0}")]
    InvalidParams(String),
    #[error("operation requires a {expected} capacity model")]
    WrongModelKind { expected: &'static str },

    // file formats
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}
