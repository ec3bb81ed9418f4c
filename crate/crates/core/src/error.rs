use std::io;

use thiserror::Error;

use crate::topology::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("no link between {0} and {1}")]
    NoSuchLink(NodeId, NodeId),

    #[error("cannot move clock backwards from {clock} ms to {requested} ms")]
    TimeRegression { clock: f64, requested: f64 },

    #[error("bandwidth history is empty")]
    EmptyHistory,

    #[error("bandwidth history timestamps must be strictly increasing (got {0} ms after {1} ms)")]
    DuplicateTimestamps(f64, f64),

    #[error("prediction time {requested} ms precedes newest sample at {newest} ms")]
    TimeInPast { requested: f64, newest: f64 },

    #[error("source and destination share a position")]
    DegeneratePair,

    #[error("invalid route endpoints: {0}")]
    InvalidEndpoints(String),

    #[error("topology file: {0}")]
    TopologyFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error("emit failed: {0}")]
    Emit(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
