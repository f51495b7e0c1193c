use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A K-user N-hop layered network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkShape {
    pub users: usize,
    pub hops: usize,
}

impl NetworkShape {
    pub fn new(users: usize, hops: usize) -> Result<Self> {
        if users < 2 {
            return Err(Error::Domain(format!("network needs at least 2 users, got {users}")));
        }
        if hops < 1 {
            return Err(Error::Domain("network needs at least one hop".into()));
        }
        Ok(Self { users, hops })
    }

    /// Number of node layers, sources and destinations included.
    pub fn layers(&self) -> usize {
        self.hops + 1
    }

    pub fn node(&self, layer: usize, index: usize) -> Result<NodeId> {
        if layer == 0 || layer > self.layers() || index == 0 || index > self.users {
            return Err(Error::Index(format!(
                "node ({layer}, {index}) outside {}-user {}-hop network",
                self.users, self.hops
            )));
        }
        Ok(NodeId { layer, index })
    }
}

/// A node: `layer` 1 holds the sources, `layer` N+1 the destinations. Both fields are one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: usize,
    pub index: usize,
}

impl NodeId {
    /// Node at `layer` with zero-based user position `i`.
    pub fn at(layer: usize, i: usize) -> Self {
        Self { layer, index: i + 1 }
    }

    /// Zero-based user position.
    pub fn pos(&self) -> usize {
        self.index - 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V({},{})", self.layer, self.index)
    }
}
