use thiserror::Error;

/// Errors raised by graph construction, sampling, and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node id {node} out of range for a graph with {n_nodes} nodes")]
    NodeOutOfRange { node: usize, n_nodes: usize },

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("edge ({i}, {j}) has non-positive weight {w}")]
    NonPositiveWeight { i: usize, j: usize, w: f64 },

    #[error("edge ({i}, {j}) has a non-finite angle")]
    NonFiniteAngle { i: usize, j: usize },

    #[error("edge ({0}, {1}) does not exist")]
    MissingEdge(usize, usize),

    #[error("path is not closed: starts at {start}, ends at {end}")]
    OpenPath { start: usize, end: usize },

    #[error("empty path")]
    EmptyPath,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("node {0} has zero degree")]
    IsolatedNode(usize),

    #[error("invalid regularization: {0}")]
    InvalidRegularization(String),

    #[error("random walk stalled at node {0}: zero degree and zero regularization")]
    StalledWalk(usize),

    #[error(
        "cycle with angle {angle:.6} has cos = {cos:.3e} < 0; the connection is not weakly \
         inconsistent, use importance sampling"
    )]
    IncoherentCycle { angle: f64, cos: f64 },

    #[error("dense computation on {n} nodes exceeds the cap of {cap} (set FS_DENSE_CAP to raise it)")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("enumeration needs at most {max_nodes} nodes and {max_edges} edges, got {n_nodes} and {n_edges}")]
    EnumerationCapExceeded {
        n_nodes: usize,
        n_edges: usize,
        max_nodes: usize,
        max_edges: usize,
    },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("graph is not connected")]
    Disconnected,

    #[error("smoothing returned a zero vector at iteration {0}")]
    ZeroIterate(usize),

    #[error("accumulator has zero total weight")]
    ZeroWeight,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty graph")]
    EmptyGraph,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
