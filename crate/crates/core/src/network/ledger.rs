use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{NetworkShape, NodeId};
use crate::error::{Error, Result};

/// Identifier of a stored symbol (a message symbol or a symbol a node generated).
pub type SymbolId = u64;

/// One piece of knowledge a node wants to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atom {
    /// A symbol held in the node's own buffer.
    OwnMessage(SymbolId),
    /// The value `node` transmitted in `slot`.
    Tx { node: NodeId, slot: usize },
    /// The value `node` received in `slot`.
    Rx { node: NodeId, slot: usize },
    /// All channel coefficients of `slot`.
    GlobalCsi(usize),
    /// Publicly shared randomness such as precoders.
    Public,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::OwnMessage(id) => write!(f, "own-message({id})"),
            Atom::Tx { node, slot } => write!(f, "tx({node}, slot {slot})"),
            Atom::Rx { node, slot } => write!(f, "rx({node}, slot {slot})"),
            Atom::GlobalCsi(slot) => write!(f, "global-csi(slot {slot})"),
            Atom::Public => write!(f, "public"),
        }
    }
}

/// One knowledge assertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub node: NodeId,
    pub at_slot: usize,
    pub purpose: String,
    pub atoms: usize,
    pub latest_csi: Option<usize>,
    pub ok: bool,
}

/// Tracks what each node legally knows under one-slot-delayed global CSI.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KnowledgeLedger {
    users: usize,
    layers: usize,
    #[serde(skip)]
    holdings: HashMap<(NodeId, SymbolId), usize>,
    #[serde(skip)]
    sent: HashSet<(NodeId, usize)>,
    #[serde(skip)]
    heard: HashSet<(NodeId, usize)>,
    next_symbol: SymbolId,
    violations: usize,
    audit: Vec<AuditEntry>,
}

impl KnowledgeLedger {
    pub fn new(shape: NetworkShape) -> Self {
        Self { users: shape.users, layers: shape.layers(), ..Self::default() }
    }

    /// Fresh symbol id held by `node` from `slot` onwards.
    pub fn grant(&mut self, node: NodeId, from_slot: usize) -> SymbolId {
        let id = self.next_symbol;
        self.next_symbol += 1;
        self.holdings.insert((node, id), from_slot);
        id
    }

    pub fn record_tx(&mut self, node: NodeId, slot: usize) {
        self.sent.insert((node, slot));
    }

    pub fn record_rx(&mut self, node: NodeId, slot: usize) {
        self.heard.insert((node, slot));
    }

    fn legal(&self, node: NodeId, atom: &Atom, at_slot: usize) -> bool {
        match *atom {
            Atom::OwnMessage(id) => self.holdings.get(&(node, id)).is_some_and(|&from| from <= at_slot),
            Atom::Tx { node: who, slot } => who == node && slot < at_slot && self.sent.contains(&(who, slot)),
            Atom::Rx { node: who, slot } => who == node && slot < at_slot && self.heard.contains(&(who, slot)),
            Atom::GlobalCsi(slot) => slot >= 1 && slot < at_slot,
            Atom::Public => true,
        }
    }

    /// Succeeds iff every atom is available to `node` when it acts in `at_slot`.
    pub fn assert_knowledge(&mut self, node: NodeId, needs: &[Atom], at_slot: usize, purpose: &str) -> Result<()> {
        let offending = if node.layer == 0 || node.layer > self.layers || node.index == 0 || node.index > self.users {
            Some(needs.first().copied().unwrap_or(Atom::Public))
        } else {
            needs.iter().find(|a| !self.legal(node, a, at_slot)).copied()
        };
        let latest_csi = needs.iter().filter_map(|a| if let Atom::GlobalCsi(s) = a { Some(*s) } else { None }).max();
        self.audit.push(AuditEntry {
            node,
            at_slot,
            purpose: purpose.to_string(),
            atoms: needs.len(),
            latest_csi,
            ok: offending.is_none(),
        });
        match offending {
            None => Ok(()),
            Some(atom) => {
                self.violations += 1;
                Err(Error::CausalityViolation { node, atom, at_slot })
            }
        }
    }

    pub fn violations(&self) -> usize {
        self.violations
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }
}
