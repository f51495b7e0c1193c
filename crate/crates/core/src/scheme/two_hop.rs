//! Phase 1 and the phase-2 offloading of the 3-user 2-hop interference scheme, simulated slot by slot.
//!
//! Hop 1 runs PSIN with all three destinations scheduled at once. Hop 2 sends pairs of nulled
//! combinations from two relays to the two destinations whose sources they contain; each slot
//! yields one order-2 symbol per source, which the sources offload back to the relays in the next
//! phase. The remaining hop-2 delivery of phase 2 is an external X-channel sub-scheme: it is
//! charged at 8/9 slot per order-2 symbol and its outcome is handed to the destinations directly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::engine::{csi, heard, Engine};
use super::psin::{psin_hop1_3user, PsinOutput};
use super::relay::{offload, Offloaded};
use super::symbols::{merge_needs, OrderSymbol, Provenance};
use super::transcript::PhaseHopCount;
use crate::accounting::eta2;
use crate::error::{Error, Result};
use crate::network::{draw_channels, Atom, NetworkShape, NodeId};
use crate::numerics::{
    fraction_string, integer, rank, ratio, solve_linear, ComplexMatrix, RandomStream, DEFAULT_RANK_TOL,
};

const USERS: usize = 3;
/// Smallest `N₁` giving whole batches, whole hop-2 rounds and whole sub-scheme slots.
pub const TWO_HOP_GRANULARITY: usize = 36;
const MESSAGE_STREAM: u64 = 3 << 32;
const MAX_ATTEMPTS: u64 = 8;

/// Record of one two-hop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoHopTranscript {
    pub n1: usize,
    pub seed: u64,
    pub channel_stream: u64,
    /// Simulated slots per (phase, hop).
    pub phase_hop_slots: Vec<PhaseHopCount>,
    /// Slots charged to the external phase-2 hop-2 sub-scheme, as `"n/d"`.
    pub phase2_hop2_charged: String,
    /// Hop totals including the charged sub-scheme slots, as `"n/d"`.
    pub hop_totals: Vec<String>,
    pub dof: String,
    /// Order-2 symbols generated in phase 1.
    pub order2: usize,
    /// Desired equations those symbols gave their destinations, counted by rank.
    pub useful_equations: usize,
    pub eta2: String,
    pub max_residual: f64,
    pub causality_violations: usize,
    pub decode_ok: bool,
}

impl TwoHopTranscript {
    pub fn t(&self, phase: usize, hop: usize) -> usize {
        self.phase_hop_slots.iter().find(|c| c.phase == phase && c.hop == hop).map_or(0, |c| c.slots)
    }
}

/// One hop-2 slot: two relays send their combinations that null source `nulled`.
struct PairSlot {
    slot: usize,
    nulled: usize,
    /// `(relay, batch)` of each transmitted combination.
    sent: [(usize, usize); 2],
    /// The two destinations served, in ascending order.
    dests: [usize; 2],
}

fn others(j: usize) -> [usize; 2] {
    let v: Vec<usize> = (0..USERS).filter(|&x| x != j).collect();
    [v[0], v[1]]
}

/// Contribution of `source` at destination `d` in a hop-2 slot.
fn contribution(engine: &Engine<'_>, out: &[PsinOutput], p: &PairSlot, d: usize, source: usize) -> Complex64 {
    let ch = engine.channel();
    p.sent.iter().map(|&(r, b)| ch.h(2, p.slot, d, r) * out[b].plc(r, p.nulled, source).value).sum()
}

fn check_n1(n1: usize) -> Result<()> {
    if n1 == 0 || !n1.is_multiple_of(TWO_HOP_GRANULARITY) {
        return Err(Error::Domain(format!("N1 must be a positive multiple of {TWO_HOP_GRANULARITY}, got {n1}")));
    }
    Ok(())
}

/// `messages[j]`: the `N₁/3` symbols source `j` sends to destination `j`.
pub fn random_two_hop_messages(n1: usize, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    check_n1(n1)?;
    let mut rng = RandomStream::new(seed, MESSAGE_STREAM).rng();
    Ok((0..USERS).map(|_| rng.complex_vec(n1 / USERS)).collect())
}

/// Runs phase 1 and the phase-2 offloading on one channel draw and decodes every destination.
fn execute(n1: usize, seed: u64, stream: u64, messages: &[Vec<Complex64>]) -> Result<TwoHopTranscript> {
    let batches = n1 / 18;
    // Phase 1 hop 1: 7 slots per batch; phase 1 hop 2 and phase 2 hop 1: N₁/4 slots each.
    let slots = 7 * batches + 2 * (n1 / 4);
    let ch = draw_channels(NetworkShape::new(USERS, 2)?, slots, RandomStream::new(seed, stream))?;
    let mut engine = Engine::new(&ch);

    let ids: Vec<Atom> = (0..USERS).map(|s| Atom::OwnMessage(engine.ledger.grant(NodeId::at(1, s), 1))).collect();
    let mut out = Vec::with_capacity(batches);
    for b in 0..batches {
        let symbols = (0..USERS).map(|s| messages[s][6 * b..6 * b + 6].to_vec()).collect();
        let needs = (0..USERS).map(|s| vec![ids[s]]).collect();
        let (_, o) = psin_hop1_3user(&mut engine, 1, 1, vec![0, 1, 2], symbols, needs)?;
        out.push(o);
    }

    // Phase 1 hop 2: per nulled source and pair of batches, six combinations in three slots.
    let mut pairs = Vec::new();
    for b0 in (0..batches).step_by(2) {
        let b1 = b0 + 1;
        for nulled in 0..USERS {
            let order = [(0, b0), (1, b0), (2, b0), (0, b1), (1, b1), (2, b1)];
            for sent in [[order[0], order[1]], [order[2], order[3]], [order[4], order[5]]] {
                let mut x = vec![None; USERS];
                for &(r, b) in &sent {
                    let combo = out[b].combination(r, nulled);
                    let relay = NodeId::at(2, r);
                    engine.require(relay, &heard(relay, out[b].slots.iter().copied()), "forward nulled combination")?;
                    engine.require(relay, &csi(out[b].slots.iter().copied()), "forward nulled combination")?;
                    x[r] = Some(combo.value);
                }
                let (slot, _) = engine.transmit(1, 2, x)?;
                pairs.push(PairSlot { slot, nulled, sent, dests: others(nulled) });
            }
        }
    }

    // Order-2 symbols regenerated at the sources, then offloaded two per slot.
    let mut offloads: Vec<Offloaded> = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let [a, b] = p.dests;
        let mut syms = vec![None; USERS];
        for (src, at) in [(a, b), (b, a)] {
            let batch_slots = p.sent.iter().flat_map(|&(_, bi)| out[bi].slots.iter().copied());
            let needs = merge_needs([[ids[src]].as_slice(), &csi(batch_slots.chain([p.slot]))]);
            let holder = NodeId::at(1, src);
            let id = engine.ledger.grant(holder, p.slot + 1);
            let mut needs = needs;
            needs.push(Atom::OwnMessage(id));
            syms[src] = Some(OrderSymbol {
                order: 2,
                dest_set: vec![a, b],
                holder,
                value: contribution(&engine, &out, p, at, src),
                provenance: Provenance::RegeneratedPlc,
                id,
                needs,
            });
        }
        offloads.push(offload(&mut engine, 2, 1, &syms)?);
    }

    // Destinations: the sub-scheme hands over the receptions of relays 1 and 2 for each offload slot.
    // plc[batch][source][relay][nulled]
    let mut plc = vec![vec![vec![vec![None; USERS]; USERS]; USERS]; batches];
    let mut useful = 0;
    for (p, off) in pairs.iter().zip(&offloads) {
        let [a, b] = p.dests;
        let mix = ComplexMatrix::from_fn(2, 2, |r, c| ch.h(1, off.slot, r, p.dests[c]));
        let order2 = solve_linear(&mix, &[off.symbols[0].value, off.symbols[1].value])?;
        for (x, other) in [(a, b), (b, a)] {
            let node = NodeId::at(3, x);
            engine.require(node, &heard(node, [p.slot]), "cancel interference")?;
            engine.require(
                node,
                &csi(p.sent.iter().flat_map(|&(_, bi)| out[bi].slots.iter().copied())),
                "unmix PLCs",
            )?;
            let idx = |s: usize| if s == a { 0 } else { 1 };
            let own = engine.received(p.slot, x) - order2[idx(other)];
            // Rows: own reception and the symbol the other destination saw, over the two PLCs of source x.
            let rows =
                ComplexMatrix::from_fn(2, 2, |r, c| ch.h(2, p.slot, if r == 0 { x } else { other }, p.sent[c].0));
            useful += rank(&rows, DEFAULT_RANK_TOL);
            let v = solve_linear(&rows, &[own, order2[idx(x)]])?;
            for (c, &(r, bi)) in p.sent.iter().enumerate() {
                plc[bi][x][r][p.nulled] = Some(v[c]);
            }
        }
    }

    let mut residual: f64 = 0.0;
    for (bi, o) in out.iter().enumerate() {
        for x in 0..USERS {
            let vals: Vec<Complex64> = (0..USERS)
                .flat_map(|i| (0..USERS).filter(move |&n| n != x).map(move |n| (i, n)))
                .map(|(i, n)| {
                    plc[bi][x][i][n]
                        .ok_or_else(|| Error::Inconsistent(format!("PLC ({i}, {n}) of batch {bi} never arrived")))
                })
                .collect::<Result<_>>()?;
            let u = solve_linear(&o.stacked_plc_matrix(x), &vals)?;
            for (t, v) in u.iter().enumerate() {
                residual = residual.max((v - messages[x][6 * bi + t]).norm());
            }
        }
    }

    let n1r = integer(n1 as i64);
    let charged = &n1r * ratio(4, 9);
    let counts = engine.counts().clone();
    let t = |m: usize, k: usize| counts.get(&(m, k)).copied().unwrap_or(0);
    let hop1 = integer((t(1, 1) + t(2, 1)) as i64);
    let hop2 = integer(t(1, 2) as i64) + &charged;
    let busiest = if hop1 > hop2 { &hop1 } else { &hop2 };
    let dof = &n1r / busiest;
    let order2 = 2 * pairs.len();
    let efficiency = eta2(&integer(order2 as i64), &integer(useful as i64))?;
    Ok(TwoHopTranscript {
        n1,
        seed,
        channel_stream: stream,
        phase_hop_slots: counts.iter().map(|(&(phase, hop), &slots)| PhaseHopCount { phase, hop, slots }).collect(),
        phase2_hop2_charged: fraction_string(&charged),
        hop_totals: vec![fraction_string(&hop1), fraction_string(&hop2)],
        dof: fraction_string(&dof),
        order2,
        useful_equations: useful,
        eta2: fraction_string(&efficiency),
        max_residual: residual,
        causality_violations: engine.ledger.violations(),
        decode_ok: residual < super::x3::DECODE_TOL,
    })
}

/// Simulates the scheme on random messages, redrawing channels on singular draws.
pub fn simulate_two_hop(n1: usize, seed: u64) -> Result<TwoHopTranscript> {
    let messages = random_two_hop_messages(n1, seed)?;
    for attempt in 0..MAX_ATTEMPTS {
        match execute(n1, seed, attempt, &messages) {
            Err(Error::RankDeficient { .. } | Error::Singular { .. }) => continue,
            other => return other,
        }
    }
    Err(Error::RankDeficient { rank: 0, required: 0 })
}
