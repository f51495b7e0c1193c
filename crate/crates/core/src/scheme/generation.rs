//! Forwarding PSIN outputs to the last relay layer and turning hop-K receptions into higher-order symbols.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::engine::{csi, heard, Engine};
use super::psin::{PsinBatch, PsinOutput};
use super::relay::{af_hop, composed_row};
use super::symbols::{merge_needs, with_dest, Held, OrderSymbol, Provenance};
use crate::error::{Error, Result};
use crate::network::{Atom, ChannelTensor, NodeId, SymbolId};
use crate::numerics::{dot, ComplexRng};

/// A PSIN batch whose nulled combinations have reached the last relay layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardedSet {
    pub batch: PsinBatch,
    pub psin: PsinOutput,
    /// `af_slots[nulled]`: slots of hops `m+1..K−1`, in hop order.
    pub af_slots: Vec<Vec<usize>>,
    /// `at_last[nulled][relay]`: what each layer-K node holds.
    pub at_last: Vec<Vec<Held>>,
}

impl ForwardedSet {
    /// `(hop, slot)` chain from the PSIN receivers to the destinations, ending with a hop-K slot.
    pub fn chain(&self, nulled: usize, hop_k_slot: usize) -> Vec<(usize, usize)> {
        let first_af = self.batch.m + 1;
        let mut chain: Vec<(usize, usize)> =
            self.af_slots[nulled].iter().enumerate().map(|(i, &s)| (first_af + i, s)).collect();
        chain.push((self.batch.k, hop_k_slot));
        chain
    }
}

/// Carries a batch's combinations from layer `m+1` to layer `K` (`K = hops`), one slot per hop and nulled index.
pub fn forward_set(engine: &mut Engine<'_>, phase: usize, batch: PsinBatch, psin: PsinOutput) -> Result<ForwardedSet> {
    let k = engine.users();
    let last_layer = engine.channel().shape().hops;
    let mut af_slots = Vec::with_capacity(batch.l);
    let mut at_last = Vec::with_capacity(batch.l);
    for nulled in 0..batch.l {
        let mut held: Vec<Held> = (0..k)
            .map(|i| {
                let node = NodeId::at(batch.m + 1, i);
                let needs = merge_needs([
                    heard(node, psin.slots.iter().copied()).as_slice(),
                    &csi(psin.slots.iter().copied()),
                    &[Atom::Public],
                ]);
                Held { value: psin.combination(i, nulled).value, needs }
            })
            .collect();
        let mut slots = Vec::new();
        for hop in batch.m + 1..last_layer {
            let inputs: Vec<Option<Held>> = held.into_iter().map(Some).collect();
            let (slot, out) = af_hop(engine, phase, hop, &inputs)?;
            slots.push(slot);
            held = out;
        }
        af_slots.push(slots);
        at_last.push(held);
    }
    Ok(ForwardedSet { batch, psin, af_slots, at_last })
}

/// Hop-K slots carrying one nulled index for a group of sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopKGroup {
    pub nulled: usize,
    pub slots: Vec<usize>,
    /// `coeffs[row][set]`: weight of each set in each slot.
    pub coeffs: Vec<Vec<Complex64>>,
}

/// `q` unit rows, then a sum row, then public random rows up to `p` rows in total.
pub fn repetition_rows(p: usize, q: usize, public: &mut ComplexRng) -> Vec<Vec<Complex64>> {
    let one = Complex64::new(1.0, 0.0);
    let mut rows: Vec<Vec<Complex64>> =
        (0..q).map(|r| (0..q).map(|c| if r == c { one } else { Complex64::default() }).collect()).collect();
    if p > q {
        rows.push(vec![one; q]);
    }
    while rows.len() < p {
        rows.push(public.complex_vec(q));
    }
    rows
}

/// Sends the layer-K values of `sets` for one nulled index, one weighted sum per row of `coeffs`.
pub fn hop_k_group(
    engine: &mut Engine<'_>,
    phase: usize,
    sets: &[&ForwardedSet],
    nulled: usize,
    coeffs: Vec<Vec<Complex64>>,
) -> Result<HopKGroup> {
    let k = engine.users();
    let hop = engine.channel().shape().hops;
    if coeffs.iter().any(|r| r.len() != sets.len()) {
        return Err(Error::Dimension("one weight per set in every row".into()));
    }
    let mut slots = Vec::with_capacity(coeffs.len());
    for row in &coeffs {
        let mut x = vec![None; k];
        for (j, xj) in x.iter_mut().enumerate() {
            let used: Vec<&Held> =
                sets.iter().zip(row).filter(|(_, g)| g.norm() > 0.0).map(|(s, _)| &s.at_last[nulled][j]).collect();
            let needs = merge_needs(used.iter().map(|h| h.needs.as_slice()).chain([[Atom::Public].as_slice()]));
            engine.require(NodeId::at(hop, j), &needs, "hop-K transmit")?;
            *xj = Some(used.iter().zip(row.iter().filter(|g| g.norm() > 0.0)).map(|(h, g)| g * h.value).sum());
        }
        let (slot, _) = engine.transmit(phase, hop, x)?;
        slots.push(slot);
    }
    Ok(HopKGroup { nulled, slots, coeffs })
}

/// Coefficients over set `s`'s layer-(m+1) PLC values of `source` as seen by `observer` in `row`.
pub fn part_coefficients(
    ch: &ChannelTensor,
    set: &ForwardedSet,
    group: &HopKGroup,
    s: usize,
    row: usize,
    observer: usize,
) -> Vec<Complex64> {
    let g = group.coeffs[row][s];
    composed_row(ch, observer, &set.chain(group.nulled, group.slots[row])).into_iter().map(|c| g * c).collect()
}

/// Contribution of one transmitter's symbols to one destination's hop-K reception.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlcPart {
    pub id: SymbolId,
    pub holder: NodeId,
    /// Destinations the part is useful to: the batch's set plus `observer`.
    pub dest_set: Vec<usize>,
    pub observer: usize,
    /// Index into the batch's transmitter list.
    pub source: usize,
    pub group: usize,
    pub row: usize,
    pub value: Complex64,
    pub needs: Vec<Atom>,
}

impl PlcPart {
    pub fn symbol(&self, provenance: Provenance) -> OrderSymbol {
        OrderSymbol {
            order: self.dest_set.len(),
            dest_set: self.dest_set.clone(),
            holder: self.holder,
            value: self.value,
            provenance,
            id: self.id,
            needs: self.needs.clone(),
        }
    }
}

/// Higher-order symbols from one hop-K group.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Generated {
    /// `L−2` per (slot, non-scheduled destination): new order-(m+1) symbols.
    pub direct: Vec<PlcPart>,
    /// One per (slot, non-scheduled destination): the remaining PLC, kept as side information.
    pub remaining: Vec<PlcPart>,
}

/// Index of the transmitter whose part stays behind as side information when `nulled` is removed.
pub fn remaining_source(l: usize, nulled: usize) -> usize {
    (nulled + l - 1) % l
}

/// Splits every non-scheduled destination's hop-K receptions into per-transmitter parts.
///
/// Each part is regenerated by its transmitter from its own symbols and delayed CSI, checked
/// against the ledger, and checked to add up to what the destination actually received.
pub fn generate_higher_order(
    engine: &mut Engine<'_>,
    sets: &[&ForwardedSet],
    group: &HopKGroup,
    group_index: usize,
) -> Result<Generated> {
    let first = sets.first().ok_or_else(|| Error::Domain("group has no sets".into()))?;
    let (k, l, m) = (first.batch.k, first.batch.l, first.batch.m);
    let dest_set = first.batch.dest_set.clone();
    let transmitters = first.batch.transmitters.clone();
    if sets.iter().any(|s| s.batch.dest_set != dest_set || s.batch.transmitters != transmitters || s.batch.m != m) {
        return Err(Error::Grouping("sets of one hop-K group must share order, destinations and transmitters".into()));
    }
    let ch = engine.channel();
    let nulled = group.nulled;
    let mut out = Generated::default();
    for (row, &slot) in group.slots.iter().enumerate() {
        for observer in (0..k).filter(|i| !dest_set.contains(i)) {
            let mut parts = Vec::with_capacity(l - 1);
            for source in (0..l).filter(|&s| s != nulled) {
                let holder = NodeId::at(m, transmitters[source]);
                let mut value = Complex64::default();
                let mut slot_atoms = vec![slot];
                for (s, set) in sets.iter().enumerate() {
                    if group.coeffs[row][s].norm() == 0.0 {
                        continue;
                    }
                    let coeffs = part_coefficients(ch, set, group, s, row, observer);
                    let v: Vec<Complex64> = (0..k)
                        .map(|r| dot(&set.psin.plc(r, nulled, source).coeff_row, &set.batch.symbols[source]))
                        .collect();
                    value += dot(&coeffs, &v);
                    slot_atoms.extend(set.psin.slots.iter().copied());
                    slot_atoms.extend(set.af_slots[nulled].iter().copied());
                }
                let needs = merge_needs(
                    sets.iter()
                        .zip(&group.coeffs[row])
                        .filter(|(_, g)| g.norm() > 0.0)
                        .map(|(s, _)| s.batch.needs[source].as_slice())
                        .chain([csi(slot_atoms).as_slice(), &[Atom::Public]]),
                );
                engine.require(holder, &needs, "regenerate PLC part")?;
                let id = engine.ledger.grant(holder, engine.now());
                parts.push(PlcPart {
                    id,
                    holder,
                    dest_set: with_dest(&dest_set, observer),
                    observer,
                    source,
                    group: group_index,
                    row,
                    value,
                    needs: vec![Atom::OwnMessage(id)],
                });
            }
            let received = engine.received(slot, observer);
            let total: Complex64 = parts.iter().map(|p| p.value).sum();
            let mag = parts.iter().map(|p| p.value.norm()).sum::<f64>().max(received.norm()).max(1.0);
            if (total - received).norm() > 1e-8 * mag {
                return Err(Error::Inconsistent(format!(
                    "regenerated parts miss the reception at destination {observer} in slot {slot} by {:e}",
                    (total - received).norm()
                )));
            }
            let keep = remaining_source(l, nulled);
            for p in parts {
                if p.source == keep {
                    out.remaining.push(p);
                } else {
                    out.direct.push(p);
                }
            }
        }
    }
    Ok(out)
}

/// Groups remaining PLCs by (holder, destination set) and takes one from each observer class per group.
///
/// Every class of a key must hold the same number of records and there must be `m+1` classes.
pub fn partition_remaining(records: &[PlcPart]) -> Result<Vec<Vec<usize>>> {
    let mut classes: BTreeMap<(NodeId, Vec<usize>), BTreeMap<usize, Vec<usize>>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        classes.entry((r.holder, r.dest_set.clone())).or_default().entry(r.observer).or_default().push(i);
    }
    let mut groups = Vec::new();
    for ((holder, set), by_observer) in classes {
        if by_observer.len() != set.len() {
            return Err(Error::Grouping(format!(
                "{holder} holds side information for {set:?} from {} observers, need {}",
                by_observer.len(),
                set.len()
            )));
        }
        let counts: Vec<usize> = by_observer.values().map(Vec::len).collect();
        if counts.iter().any(|&c| c != counts[0]) {
            return Err(Error::Grouping(format!("{holder} has unbalanced side information for {set:?}: {counts:?}")));
        }
        for n in 0..counts[0] {
            groups.push(by_observer.values().map(|v| v[n]).collect());
        }
    }
    Ok(groups)
}

/// A public combination of a group of remaining PLCs held by one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedSymbol {
    pub symbol: OrderSymbol,
    /// Indices into the remaining-PLC list.
    pub members: Vec<usize>,
    pub coeffs: Vec<Complex64>,
}

/// `m` combinations per group of `m+1` remaining PLCs: their plain sum when `m = 1`, public random weights otherwise.
pub fn combine_remaining(
    engine: &mut Engine<'_>,
    records: &[PlcPart],
    groups: &[Vec<usize>],
    public: &mut ComplexRng,
) -> Result<Vec<CombinedSymbol>> {
    let mut out = Vec::new();
    for members in groups {
        let first = &records[members[0]];
        let m = members.len() - 1;
        for _ in 0..m {
            let coeffs = if m == 1 { vec![Complex64::new(1.0, 0.0); 2] } else { public.complex_vec(members.len()) };
            let needs =
                merge_needs(members.iter().map(|&i| records[i].needs.as_slice()).chain([[Atom::Public].as_slice()]));
            engine.require(first.holder, &needs, "combine side information")?;
            let value = members.iter().zip(&coeffs).map(|(&i, g)| g * records[i].value).sum();
            let id = engine.ledger.grant(first.holder, engine.now());
            out.push(CombinedSymbol {
                symbol: OrderSymbol {
                    order: first.dest_set.len(),
                    dest_set: first.dest_set.clone(),
                    holder: first.holder,
                    value,
                    provenance: Provenance::PairedSideInfo,
                    id,
                    needs: vec![Atom::OwnMessage(id)],
                },
                members: members.clone(),
                coeffs,
            });
        }
    }
    Ok(out)
}
