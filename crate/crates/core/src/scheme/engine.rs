//! Slot clock shared by all scheme building blocks: transmits, propagates and logs.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{propagate, Atom, ChannelTensor, KnowledgeLedger, NodeId};

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub phase: usize,
    pub hop: usize,
    /// Transmitted values by node position; `None` for silent nodes.
    pub tx: Vec<Option<Complex64>>,
    pub rx: Vec<Complex64>,
}

/// Runs one simulation: hands out consecutive slots and keeps the ledger up to date.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    ch: &'a ChannelTensor,
    pub ledger: KnowledgeLedger,
    next: usize,
    log: Vec<SlotRecord>,
    counts: BTreeMap<(usize, usize), usize>,
}

impl<'a> Engine<'a> {
    pub fn new(ch: &'a ChannelTensor) -> Self {
        Self { ch, ledger: KnowledgeLedger::new(ch.shape()), next: 1, log: Vec::new(), counts: BTreeMap::new() }
    }

    pub fn channel(&self) -> &'a ChannelTensor {
        self.ch
    }

    pub fn users(&self) -> usize {
        self.ch.shape().users
    }

    /// The slot the next transmission will use.
    pub fn now(&self) -> usize {
        self.next
    }

    /// Asserts that `node` may use `needs` at the current slot.
    pub fn require(&mut self, node: NodeId, needs: &[Atom], purpose: &str) -> Result<()> {
        let now = self.next;
        self.ledger.assert_knowledge(node, needs, now, purpose)
    }

    /// Sends `x` over `hop` in the current slot and returns `(slot, received)`.
    ///
    /// Senders must have been cleared with [`require`](Self::require) beforehand.
    pub fn transmit(&mut self, phase: usize, hop: usize, x: Vec<Option<Complex64>>) -> Result<(usize, Vec<Complex64>)> {
        let slot = self.next;
        if slot > self.ch.slots() {
            return Err(Error::Index(format!("slot {slot} beyond the {} drawn slots", self.ch.slots())));
        }
        let dense: Vec<Complex64> = x.iter().map(|v| v.unwrap_or_default()).collect();
        let rx = propagate(self.ch, hop, slot, &dense)?;
        for (i, v) in x.iter().enumerate() {
            if v.is_some() {
                self.ledger.record_tx(NodeId::at(hop, i), slot);
            }
        }
        for i in 0..rx.len() {
            self.ledger.record_rx(NodeId::at(hop + 1, i), slot);
        }
        self.log.push(SlotRecord { slot, phase, hop, tx: x, rx: rx.clone() });
        *self.counts.entry((phase, hop)).or_default() += 1;
        self.next += 1;
        Ok((slot, rx))
    }

    pub fn log(&self) -> &[SlotRecord] {
        &self.log
    }

    pub fn record(&self, slot: usize) -> &SlotRecord {
        &self.log[slot - 1]
    }

    /// Value node `rx` of layer `hop + 1` received in `slot`.
    pub fn received(&self, slot: usize, rx: usize) -> Complex64 {
        self.log[slot - 1].rx[rx]
    }

    /// Slots used per (phase, hop).
    pub fn counts(&self) -> &BTreeMap<(usize, usize), usize> {
        &self.counts
    }

    /// Slots used per hop over all phases.
    pub fn hop_totals(&self) -> Vec<usize> {
        let mut out = vec![0; self.ch.shape().hops];
        for (&(_, hop), &n) in &self.counts {
            out[hop - 1] += n;
        }
        out
    }

    pub fn into_parts(self) -> (KnowledgeLedger, Vec<SlotRecord>, BTreeMap<(usize, usize), usize>) {
        (self.ledger, self.log, self.counts)
    }
}

/// CSI atoms for a list of slots.
pub fn csi(slots: impl IntoIterator<Item = usize>) -> Vec<Atom> {
    slots.into_iter().map(Atom::GlobalCsi).collect()
}

/// Own-reception atoms for a list of slots.
pub fn heard(node: NodeId, slots: impl IntoIterator<Item = usize>) -> Vec<Atom> {
    slots.into_iter().map(|slot| Atom::Rx { node, slot }).collect()
}
