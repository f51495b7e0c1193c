//! Offloading, amplify-and-forward and final delivery.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::engine::{csi, heard, Engine};
use super::symbols::{Held, OrderSymbol, Provenance};
use crate::error::{Error, Result};
use crate::network::{Atom, ChannelTensor, NodeId};
use crate::numerics::{rank, ComplexMatrix, DEFAULT_RANK_TOL};

/// Result of one offloading slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offloaded {
    pub slot: usize,
    /// Positions that transmitted.
    pub active: Vec<usize>,
    /// One new symbol per node of the next layer.
    pub symbols: Vec<OrderSymbol>,
}

/// Sends one symbol per holder over `hop`; every next-layer node keeps its reception as a new symbol.
pub fn offload(
    engine: &mut Engine<'_>,
    phase: usize,
    hop: usize,
    symbols: &[Option<OrderSymbol>],
) -> Result<Offloaded> {
    let k = engine.users();
    if symbols.len() != k {
        return Err(Error::Dimension(format!("offload needs {k} entries, got {}", symbols.len())));
    }
    let present: Vec<&OrderSymbol> = symbols.iter().flatten().collect();
    let Some(first) = present.first() else {
        return Err(Error::Domain("offload needs at least one symbol".into()));
    };
    if present.iter().any(|s| s.dest_set != first.dest_set || s.order != first.order) {
        return Err(Error::Domain("offloaded symbols must share order and destination set".into()));
    }
    let mut x = vec![None; k];
    let mut active = Vec::new();
    for (pos, sym) in symbols.iter().enumerate() {
        let Some(sym) = sym else { continue };
        if sym.holder != NodeId::at(hop, pos) {
            return Err(Error::Domain(format!(
                "symbol held by {} cannot be sent by position {pos} of layer {hop}",
                sym.holder
            )));
        }
        engine.require(sym.holder, &sym.needs, "offload")?;
        x[pos] = Some(sym.value);
        active.push(pos);
    }
    let (slot, rx) = engine.transmit(phase, hop, x)?;
    let ch = engine.channel();
    let mixing = ComplexMatrix::from_fn(k, active.len(), |r, c| ch.h(hop, slot, r, active[c]));
    let r = rank(&mixing, DEFAULT_RANK_TOL);
    if r < active.len() {
        return Err(Error::RankDeficient { rank: r, required: active.len() });
    }
    let symbols = rx
        .iter()
        .enumerate()
        .map(|(pos, &value)| {
            let holder = NodeId::at(hop + 1, pos);
            let id = engine.ledger.grant(holder, slot + 1);
            OrderSymbol {
                order: first.order,
                dest_set: first.dest_set.clone(),
                holder,
                value,
                provenance: Provenance::Offloaded,
                id,
                needs: vec![Atom::OwnMessage(id)],
            }
        })
        .collect();
    Ok(Offloaded { slot, active, symbols })
}

/// Each node of layer `hop` forwards its value; returns the slot and what layer `hop + 1` holds.
pub fn af_hop(
    engine: &mut Engine<'_>,
    phase: usize,
    hop: usize,
    inputs: &[Option<Held>],
) -> Result<(usize, Vec<Held>)> {
    let k = engine.users();
    if inputs.len() != k {
        return Err(Error::Dimension(format!("AF needs {k} entries, got {}", inputs.len())));
    }
    let mut x = vec![None; k];
    for (pos, input) in inputs.iter().enumerate() {
        if let Some(h) = input {
            engine.require(NodeId::at(hop, pos), &h.needs, "amplify and forward")?;
            x[pos] = Some(h.value);
        }
    }
    let (slot, rx) = engine.transmit(phase, hop, x)?;
    let out = rx
        .into_iter()
        .enumerate()
        .map(|(pos, value)| Held { value, needs: heard(NodeId::at(hop + 1, pos), [slot]) })
        .collect();
    Ok((slot, out))
}

/// Effective row `h_rx(hop_K)ᵀ·H(hop_{K−1})···H(hop_first)` for a chain of `(hop, slot)` pairs given first to last.
pub fn composed_row(ch: &ChannelTensor, rx: usize, chain: &[(usize, usize)]) -> Vec<Complex64> {
    let k = ch.shape().users;
    let Some(&(last_hop, last_slot)) = chain.last() else {
        let mut e = vec![Complex64::default(); k];
        e[rx] = Complex64::new(1.0, 0.0);
        return e;
    };
    let mut row = ch.row(last_hop, last_slot, rx);
    for &(hop, slot) in chain[..chain.len() - 1].iter().rev() {
        row = (0..k).map(|j| (0..k).map(|i| row[i] * ch.h(hop, slot, i, j)).sum()).collect();
    }
    row
}

/// One slot of time-division delivery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliverySlot {
    pub slot: usize,
    pub holder: usize,
}

/// Sends each symbol alone in its own slot over `hop`.
pub fn final_delivery(
    engine: &mut Engine<'_>,
    phase: usize,
    hop: usize,
    symbols: &[OrderSymbol],
) -> Result<Vec<DeliverySlot>> {
    let k = engine.users();
    let mut out = Vec::with_capacity(symbols.len());
    for sym in symbols {
        if sym.holder.layer != hop {
            return Err(Error::Domain(format!("symbol held by {} cannot be delivered over hop {hop}", sym.holder)));
        }
        engine.require(sym.holder, &sym.needs, "final delivery")?;
        let mut x = vec![None; k];
        x[sym.holder.pos()] = Some(sym.value);
        let (slot, _) = engine.transmit(phase, hop, x)?;
        out.push(DeliverySlot { slot, holder: sym.holder.pos() });
    }
    Ok(out)
}

/// What destination `dest` recovers from one delivery slot: its reception divided by the channel.
pub fn receive_delivery(engine: &mut Engine<'_>, hop: usize, dest: usize, d: &DeliverySlot) -> Result<Complex64> {
    let node = NodeId::at(hop + 1, dest);
    let needs = [Atom::Rx { node, slot: d.slot }, Atom::GlobalCsi(d.slot)];
    engine.require(node, &needs, "final delivery decode")?;
    Ok(engine.received(d.slot, dest) / engine.channel().h(hop, d.slot, dest, d.holder))
}

/// CSI atoms for every slot of a composed chain.
pub fn chain_csi(chain: &[(usize, usize)]) -> Vec<Atom> {
    csi(chain.iter().map(|&(_, s)| s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{draw_channels, NetworkShape};
    use crate::numerics::{solve_linear, RandomStream};

    fn setup(hops: usize) -> crate::network::ChannelTensor {
        draw_channels(NetworkShape::new(3, hops).unwrap(), 40, RandomStream::new(3, 0)).unwrap()
    }

    fn source_symbols(engine: &mut Engine<'_>, values: &[Complex64]) -> Vec<Option<OrderSymbol>> {
        values
            .iter()
            .enumerate()
            .map(|(pos, &value)| {
                let holder = NodeId::at(1, pos);
                let id = engine.ledger.grant(holder, 1);
                Some(OrderSymbol {
                    order: 2,
                    dest_set: vec![0, 1],
                    holder,
                    value,
                    provenance: Provenance::Original,
                    id,
                    needs: vec![Atom::OwnMessage(id)],
                })
            })
            .collect()
    }

    #[test]
    fn offload_is_invertible() {
        let ch = setup(3);
        let mut e = Engine::new(&ch);
        let vals = RandomStream::new(3, 5).rng().complex_vec(3);
        let syms = source_symbols(&mut e, &vals);
        let off = offload(&mut e, 2, 1, &syms).unwrap();
        assert_eq!(off.symbols.len(), 3);
        let h = ch.hop_matrix(1, off.slot).unwrap();
        let rx: Vec<_> = off.symbols.iter().map(|s| s.value).collect();
        let back = solve_linear(&h, &rx).unwrap();
        for i in 0..3 {
            assert!((back[i] - vals[i]).norm() < 1e-9);
        }
        assert!(off.symbols.iter().all(|s| s.holder.layer == 2));
    }

    #[test]
    fn offload_two_of_three() {
        let ch = setup(3);
        let mut e = Engine::new(&ch);
        let vals = RandomStream::new(3, 6).rng().complex_vec(3);
        let mut syms = source_symbols(&mut e, &vals);
        syms[2] = None;
        let off = offload(&mut e, 2, 1, &syms).unwrap();
        assert_eq!(off.active, vec![0, 1]);
        for pair in [[0usize, 1], [0, 2], [1, 2]] {
            let a = ComplexMatrix::from_fn(2, 2, |r, c| ch.h(1, off.slot, pair[r], c));
            let b = [off.symbols[pair[0]].value, off.symbols[pair[1]].value];
            let x = solve_linear(&a, &b).unwrap();
            assert!((x[0] - vals[0]).norm() < 1e-9 && (x[1] - vals[1]).norm() < 1e-9);
        }
    }

    #[test]
    fn af_single_relay_and_composition() {
        let ch = setup(4);
        let mut e = Engine::new(&ch);
        // Relays of layer 2 hold whatever they received in slot 1.
        e.transmit(1, 1, vec![Some(Complex64::new(1.0, 0.0)), None, None]).unwrap();
        let held: Vec<Option<Held>> = (0..3)
            .map(|p| Some(Held { value: Complex64::new(p as f64 + 1.0, 0.5), needs: heard(NodeId::at(2, p), [1]) }))
            .collect();
        let mut only = held.clone();
        only[0] = None;
        only[2] = None;
        let (slot, out) = af_hop(&mut e, 1, 2, &only).unwrap();
        for i in 0..3 {
            assert!((out[i].value - ch.h(2, slot, i, 1) * held[1].as_ref().unwrap().value).norm() < 1e-14);
        }
        let (s2, out2) = af_hop(&mut e, 1, 2, &held).unwrap();
        let next: Vec<Option<Held>> = out2.into_iter().map(Some).collect();
        let (s3, out3) = af_hop(&mut e, 1, 3, &next).unwrap();
        let last: Vec<Option<Held>> = out3.into_iter().map(Some).collect();
        let (s4, out4) = af_hop(&mut e, 1, 4, &last).unwrap();
        let input: Vec<Complex64> = held.iter().map(|h| h.as_ref().unwrap().value).collect();
        for i in 0..3 {
            let row = composed_row(&ch, i, &[(2, s2), (3, s3), (4, s4)]);
            let direct: Complex64 = row.iter().zip(&input).map(|(a, b)| a * b).sum();
            assert!((direct - out4[i].value).norm() < 1e-9 * (1.0 + direct.norm()));
        }
        assert_eq!(e.ledger.violations(), 0);
    }

    #[test]
    fn final_delivery_counts_and_values() {
        let ch = setup(3);
        let mut e = Engine::new(&ch);
        assert!(final_delivery(&mut e, 3, 1, &[]).unwrap().is_empty());
        let vals = RandomStream::new(3, 7).rng().complex_vec(3);
        let syms: Vec<OrderSymbol> = source_symbols(&mut e, &vals).into_iter().flatten().collect();
        let slots = final_delivery(&mut e, 3, 1, &syms[..1]).unwrap();
        assert_eq!(slots.len(), 1);
        for dest in 0..3 {
            let v = receive_delivery(&mut e, 1, dest, &slots[0]).unwrap();
            assert!((v - vals[0]).norm() < 1e-12);
        }
    }
}
