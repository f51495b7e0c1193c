//! Layered network model: shapes, per-slot channels, noise-free propagation and the delayed-CSI ledger.

mod channel;
mod ledger;
mod shape;

pub use channel::{draw_channels, propagate, ChannelTensor};
pub use ledger::{Atom, AuditEntry, KnowledgeLedger, SymbolId};
pub use shape::{NetworkShape, NodeId};
