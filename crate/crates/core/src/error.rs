use thiserror::Error;

use crate::network::{Atom, NodeId};

/// Errors raised anywhere in the core crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is rank deficient: rank {rank} < required {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("linear system is singular (dimension {dim}, rank {rank})")]
    Singular { dim: usize, rank: usize },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("causality violation: node {node} used {atom} at slot {at_slot}")]
    CausalityViolation { node: NodeId, atom: Atom, at_slot: usize },

    #[error("decode failure at destination {destination}: residual {residual:e}")]
    DecodeFailure { destination: usize, residual: f64 },

    #[error("slot count mismatch for {what}: measured {measured}, expected {expected}")]
    CountMismatch { what: String, measured: String, expected: String },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("grouping error: {0}")]
    Grouping(String),
}

pub type Result<T> = std::result::Result<T, Error>;
