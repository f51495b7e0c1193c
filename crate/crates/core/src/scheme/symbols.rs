//! Symbols that circulate through the network.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::network::{Atom, NodeId, SymbolId};

/// How a symbol came to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Offloaded,
    RegeneratedPlc,
    PairedSideInfo,
}

/// A value held at one node and useful to every destination in `dest_set`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSymbol {
    pub order: usize,
    /// Zero-based destination positions, sorted.
    pub dest_set: Vec<usize>,
    pub holder: NodeId,
    pub value: Complex64,
    pub provenance: Provenance,
    pub id: SymbolId,
    /// Knowledge the holder needs to (re)produce the value.
    pub needs: Vec<Atom>,
}

/// A value a node can transmit, with the knowledge needed to produce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Held {
    pub value: Complex64,
    pub needs: Vec<Atom>,
}

/// Sorted union of a destination set and one extra destination.
pub fn with_dest(dest_set: &[usize], extra: usize) -> Vec<usize> {
    let mut out = dest_set.to_vec();
    if !out.contains(&extra) {
        out.push(extra);
    }
    out.sort_unstable();
    out
}

/// Concatenates knowledge lists, dropping duplicates while keeping first-seen order.
pub fn merge_needs<'a>(lists: impl IntoIterator<Item = &'a [Atom]>) -> Vec<Atom> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for list in lists {
        for a in list {
            if seen.insert(*a) {
                out.push(*a);
            }
        }
    }
    out
}
