//! The complete three-phase scheme on the 3-user 3-hop X network, with exact decoding at every destination.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use super::engine::{csi, heard, Engine};
use super::generation::{
    combine_remaining, forward_set, generate_higher_order, hop_k_group, part_coefficients, partition_remaining,
    repetition_rows, CombinedSymbol, ForwardedSet, HopKGroup, PlcPart,
};
use super::psin::psin_hop1_3user;
use super::relay::{final_delivery, offload, receive_delivery, DeliverySlot, Offloaded};
use super::symbols::{merge_needs, OrderSymbol, Provenance};
use super::transcript::{
    DestinationReport, GeneratedCounts, PhaseHopCount, RedrawEvent, StageTranscript, SystemStats, Transcript,
};
use crate::accounting::{durations, SchemeParams};
use crate::error::{Error, Result};
use crate::network::{draw_channels, Atom, ChannelTensor, NetworkShape, NodeId};
use crate::numerics::{
    condition_number, fraction_string, integer, least_squares, rank, ratio, solve_linear, to_f64, ComplexMatrix,
    RandomStream, DEFAULT_RANK_TOL,
};

const USERS: usize = 3;
/// Smallest `N₁` the orchestration can run with whole slots and complete pairings.
pub const X3_GRANULARITY: usize = 270;
/// Largest accepted decode residual.
pub const DECODE_TOL: f64 = 1e-8;
/// Slots per granule: hop totals 159 + 138 + 198.
const SLOTS_PER_GRANULE: usize = 495;
const MESSAGE_STREAM: u64 = 1 << 32;
const PUBLIC_STREAM: u64 = 2 << 32;
/// Channel draws tried before giving up on a seed.
pub const MAX_ATTEMPTS: u64 = 8;

/// `messages[source][destination]`: symbols of one source for one destination.
pub type Messages = Vec<Vec<Vec<Complex64>>>;

/// Smallest multiple of [`X3_GRANULARITY`] not below `n1`, and whether it differs from `n1`.
pub fn round_n1(n1: usize) -> (usize, bool) {
    let r = n1.max(1).div_ceil(X3_GRANULARITY) * X3_GRANULARITY;
    (r, r != n1)
}

/// Channel slots one stage consumes.
pub fn stage_slots(n1: usize) -> usize {
    n1 / X3_GRANULARITY * SLOTS_PER_GRANULE
}

fn check_n1(n1: usize) -> Result<()> {
    if n1 == 0 || !n1.is_multiple_of(X3_GRANULARITY) {
        return Err(Error::Domain(format!("N1 must be a positive multiple of {X3_GRANULARITY}, got {n1}")));
    }
    Ok(())
}

/// Gaussian information symbols, `N₁/9` per (source, destination).
pub fn random_messages(n1: usize, seed: u64) -> Result<Messages> {
    check_n1(n1)?;
    let mut rng = RandomStream::new(seed, MESSAGE_STREAM).rng();
    Ok((0..USERS).map(|_| (0..USERS).map(|_| rng.complex_vec(n1 / 9)).collect()).collect())
}

/// Largest entrywise difference between two message sets.
pub fn message_residual(a: &Messages, b: &Messages) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PartKey {
    Direct(usize),
    Remaining(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Origin {
    Direct(usize),
    Combined(usize),
}

struct P1Group {
    dest: usize,
    chunk: usize,
    group: HopKGroup,
}

struct P2Group {
    batch: usize,
    group: HopKGroup,
}

#[derive(Default)]
struct State {
    granules: usize,
    p1_sets: Vec<Vec<ForwardedSet>>,
    p1_groups: Vec<P1Group>,
    p1_group_of: HashMap<(usize, usize, usize), usize>,
    p1_direct: Vec<PlcPart>,
    p1_remaining: Vec<PlcPart>,
    p1_parts: HashMap<(usize, usize, usize, usize), PartKey>,
    p1_pairs: Vec<Vec<usize>>,
    p1_paired: Vec<CombinedSymbol>,
    /// `(pair, source)` → origin of each order-2 symbol, in offload order.
    o2: BTreeMap<(usize, usize), Vec<Origin>>,
    p2_offloads: Vec<Vec<Offloaded>>,
    /// `(pair, batch within pair)`.
    p2_batches: Vec<(usize, usize)>,
    p2_sets: Vec<ForwardedSet>,
    p2_groups: Vec<P2Group>,
    p2_group_of: HashMap<(usize, usize), usize>,
    p2_direct: Vec<PlcPart>,
    p2_remaining: Vec<PlcPart>,
    p2_parts: HashMap<(usize, usize, usize, usize), PartKey>,
    p2_triples: Vec<Vec<usize>>,
    p2_combined: Vec<CombinedSymbol>,
    /// Per relay, the origin of each order-3 symbol in offload order.
    o3: Vec<Vec<Origin>>,
    p3_offloads: Vec<Offloaded>,
    deliveries: Vec<DeliverySlot>,
}

const PAIRS: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];

fn pair_index(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    PAIRS.iter().position(|p| *p == [lo, hi]).expect("distinct users")
}

fn index_parts(
    map: &mut HashMap<(usize, usize, usize, usize), PartKey>,
    direct: &[PlcPart],
    remaining: &[PlcPart],
    from: (usize, usize),
) {
    for (i, p) in direct.iter().enumerate().skip(from.0) {
        map.insert((p.group, p.row, p.observer, p.source), PartKey::Direct(i));
    }
    for (i, p) in remaining.iter().enumerate().skip(from.1) {
        map.insert((p.group, p.row, p.observer, p.source), PartKey::Remaining(i));
    }
}

fn direct_sibling(
    map: &HashMap<(usize, usize, usize, usize), PartKey>,
    group: usize,
    row: usize,
    observer: usize,
) -> Result<usize> {
    (0..USERS)
        .find_map(|s| match map.get(&(group, row, observer, s)) {
            Some(PartKey::Direct(i)) => Some(*i),
            _ => None,
        })
        .ok_or_else(|| Error::Inconsistent(format!("no direct part for group {group} row {row} observer {observer}")))
}

fn expect_count(what: &str, measured: usize, expected: usize) -> Result<()> {
    if measured != expected {
        return Err(Error::CountMismatch {
            what: what.into(),
            measured: measured.to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(())
}

/// Outcome of one pass over a fixed channel draw.
#[derive(Debug, Clone)]
pub struct X3Outcome {
    pub decoded: Messages,
    pub stage: StageTranscript,
}

/// Runs all three phases over `ch` and decodes at every destination.
pub fn execute_x3(ch: &ChannelTensor, messages: &Messages, public: RandomStream) -> Result<X3Outcome> {
    let shape = ch.shape();
    if shape.users != USERS || shape.hops != 3 {
        return Err(Error::Dimension(format!(
            "needs a 3-user 3-hop channel, got {}-user {}-hop",
            shape.users, shape.hops
        )));
    }
    if messages.len() != USERS || messages.iter().any(|m| m.len() != USERS) {
        return Err(Error::Dimension("messages must be indexed [source][destination] over 3 users".into()));
    }
    let len = messages[0][0].len();
    if len == 0 || !len.is_multiple_of(30) || messages.iter().flatten().any(|m| m.len() != len) {
        return Err(Error::Dimension(format!(
            "every message needs the same positive multiple of 30 symbols, got {len}"
        )));
    }
    let granules = len / 30;
    if ch.slots() < granules * SLOTS_PER_GRANULE {
        return Err(Error::Index(format!("{} slots drawn, {} needed", ch.slots(), granules * SLOTS_PER_GRANULE)));
    }
    let mut engine = Engine::new(ch);
    let mut public_rng = public.rng();
    let mut st = State { granules, ..State::default() };

    let msg_needs: Vec<Vec<Vec<Atom>>> = (0..USERS)
        .map(|s| (0..USERS).map(|_| vec![Atom::OwnMessage(engine.ledger.grant(NodeId::at(1, s), 1))]).collect())
        .collect();

    // Phase 1, hop 1: one PSIN batch of six symbols per source for a single destination.
    let batches_per_dest = 5 * granules;
    let mut p1_psin = Vec::with_capacity(USERS);
    for d in 0..USERS {
        let mut per = Vec::with_capacity(batches_per_dest);
        for b in 0..batches_per_dest {
            let symbols = (0..USERS).map(|s| messages[s][d][6 * b..6 * b + 6].to_vec()).collect();
            let needs = (0..USERS).map(|s| msg_needs[s][d].clone()).collect();
            per.push(psin_hop1_3user(&mut engine, 1, 1, vec![d], symbols, needs)?);
        }
        p1_psin.push(per);
    }
    // Phase 1, hop 2: forward every nulled combination to the last relay layer.
    for per in p1_psin {
        let mut sets = Vec::with_capacity(per.len());
        for (batch, out) in per {
            sets.push(forward_set(&mut engine, 1, batch, out)?);
        }
        st.p1_sets.push(sets);
    }
    // Phase 1, hop 3: five distinct slots per nulled index and chunk of five batches, then their sum.
    for d in 0..USERS {
        for chunk in 0..granules {
            for nulled in 0..USERS {
                let refs: Vec<&ForwardedSet> = st.p1_sets[d][5 * chunk..5 * chunk + 5].iter().collect();
                let rows = repetition_rows(6, 5, &mut public_rng);
                let group = hop_k_group(&mut engine, 1, &refs, nulled, rows)?;
                let gi = st.p1_groups.len();
                let from = (st.p1_direct.len(), st.p1_remaining.len());
                let gen = generate_higher_order(&mut engine, &refs, &group, gi)?;
                st.p1_direct.extend(gen.direct);
                st.p1_remaining.extend(gen.remaining);
                index_parts(&mut st.p1_parts, &st.p1_direct, &st.p1_remaining, from);
                st.p1_group_of.insert((d, chunk, nulled), gi);
                st.p1_groups.push(P1Group { dest: d, chunk, group });
            }
        }
    }
    st.p1_pairs = partition_remaining(&st.p1_remaining)?;
    st.p1_paired = combine_remaining(&mut engine, &st.p1_remaining, &st.p1_pairs, &mut public_rng)?;

    // Order-2 symbols, grouped by destination pair and holding source.
    let mut o2_symbols: BTreeMap<(usize, usize), Vec<OrderSymbol>> = BTreeMap::new();
    for (i, p) in st.p1_direct.iter().enumerate() {
        let key = (pair_index(p.dest_set[0], p.dest_set[1]), p.holder.pos());
        o2_symbols.entry(key).or_default().push(p.symbol(Provenance::RegeneratedPlc));
        st.o2.entry(key).or_default().push(Origin::Direct(i));
    }
    for (i, c) in st.p1_paired.iter().enumerate() {
        let key = (pair_index(c.symbol.dest_set[0], c.symbol.dest_set[1]), c.symbol.holder.pos());
        o2_symbols.entry(key).or_default().push(c.symbol.clone());
        st.o2.entry(key).or_default().push(Origin::Combined(i));
    }
    let per_pair_source = 18 * granules;
    for pi in 0..PAIRS.len() {
        for s in 0..USERS {
            let n = o2_symbols.get(&(pi, s)).map_or(0, Vec::len);
            expect_count(&format!("order-2 symbols of source {} for pair {:?}", s + 1, PAIRS[pi]), n, per_pair_source)?;
        }
    }

    // Phase 2, hop 1: offload one symbol per source per slot.
    for pi in 0..PAIRS.len() {
        let mut offs = Vec::with_capacity(per_pair_source);
        for i in 0..per_pair_source {
            let syms: Vec<Option<OrderSymbol>> = (0..USERS).map(|s| Some(o2_symbols[&(pi, s)][i].clone())).collect();
            offs.push(offload(&mut engine, 2, 1, &syms)?);
        }
        st.p2_offloads.push(offs);
    }
    // Phase 2, hop 2: PSIN among the relays, six offloaded symbols each.
    let mut p2_psin = Vec::new();
    for pi in 0..PAIRS.len() {
        for j in 0..3 * granules {
            let offs = &st.p2_offloads[pi][6 * j..6 * j + 6];
            let symbols = (0..USERS).map(|b| offs.iter().map(|o| o.symbols[b].value).collect()).collect();
            let needs = (0..USERS).map(|b| merge_needs(offs.iter().map(|o| o.symbols[b].needs.as_slice()))).collect();
            p2_psin.push(psin_hop1_3user(&mut engine, 2, 2, PAIRS[pi].to_vec(), symbols, needs)?);
            st.p2_batches.push((pi, j));
        }
    }
    for (batch, out) in p2_psin {
        st.p2_sets.push(forward_set(&mut engine, 2, batch, out)?);
    }
    // Phase 2, hop 3: each combination twice.
    for bi in 0..st.p2_sets.len() {
        for nulled in 0..USERS {
            let refs = [&st.p2_sets[bi]];
            let rows = repetition_rows(2, 1, &mut public_rng);
            let group = hop_k_group(&mut engine, 2, &refs, nulled, rows)?;
            let gi = st.p2_groups.len();
            let from = (st.p2_direct.len(), st.p2_remaining.len());
            let gen = generate_higher_order(&mut engine, &refs, &group, gi)?;
            st.p2_direct.extend(gen.direct);
            st.p2_remaining.extend(gen.remaining);
            index_parts(&mut st.p2_parts, &st.p2_direct, &st.p2_remaining, from);
            st.p2_group_of.insert((bi, nulled), gi);
            st.p2_groups.push(P2Group { batch: bi, group });
        }
    }
    st.p2_triples = partition_remaining(&st.p2_remaining)?;
    st.p2_combined = combine_remaining(&mut engine, &st.p2_remaining, &st.p2_triples, &mut public_rng)?;

    let mut o3_symbols: Vec<Vec<OrderSymbol>> = vec![Vec::new(); USERS];
    st.o3 = vec![Vec::new(); USERS];
    for (i, p) in st.p2_direct.iter().enumerate() {
        o3_symbols[p.holder.pos()].push(p.symbol(Provenance::RegeneratedPlc));
        st.o3[p.holder.pos()].push(Origin::Direct(i));
    }
    for (i, c) in st.p2_combined.iter().enumerate() {
        o3_symbols[c.symbol.holder.pos()].push(c.symbol.clone());
        st.o3[c.symbol.holder.pos()].push(Origin::Combined(i));
    }
    let per_relay = 30 * granules;
    for (b, syms) in o3_symbols.iter().enumerate() {
        expect_count(&format!("order-3 symbols at relay {}", b + 1), syms.len(), per_relay)?;
    }

    // Phase 3: offload over hop 2, then deliver one symbol per slot over hop 3.
    for i in 0..per_relay {
        let syms: Vec<Option<OrderSymbol>> = (0..USERS).map(|b| Some(o3_symbols[b][i].clone())).collect();
        st.p3_offloads.push(offload(&mut engine, 3, 2, &syms)?);
    }
    let layer3: Vec<OrderSymbol> = st.p3_offloads.iter().flat_map(|o| o.symbols.iter().cloned()).collect();
    st.deliveries = final_delivery(&mut engine, 3, 3, &layer3)?;

    let mut decoded: Messages = vec![vec![Vec::new(); USERS]; USERS];
    let mut reports = Vec::with_capacity(USERS);
    for x in 0..USERS {
        let (own, report) = decode_destination(&mut engine, &st, x)?;
        for (s, v) in own.into_iter().enumerate() {
            decoded[s][x] = v;
        }
        reports.push(report);
    }
    for (x, report) in reports.iter_mut().enumerate() {
        let orig: Vec<&Complex64> = (0..USERS).flat_map(|s| messages[s][x].iter()).collect();
        let got: Vec<&Complex64> = (0..USERS).flat_map(|s| decoded[s][x].iter()).collect();
        report.symbols = got.len();
        report.max_residual = orig.iter().zip(&got).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max);
    }

    let generated = GeneratedCounts {
        direct_order2: st.p1_direct.len(),
        paired_order2: st.p1_paired.len(),
        direct_order3: st.p2_direct.len(),
        combined_order3: st.p2_combined.len(),
    };
    let max_residual = reports.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    let hop_totals = engine.hop_totals();
    let phase_hop_slots =
        engine.counts().iter().map(|(&(phase, hop), &slots)| PhaseHopCount { phase, hop, slots }).collect();
    let causality_checks = engine.ledger.audit().len();
    let causality_violations = engine.ledger.violations();
    let stream = ch.stream();
    let (_, log, _) = engine.into_parts();
    let stage = StageTranscript {
        channel_seed: stream.seed,
        channel_stream: stream.stream,
        public_stream: public.stream,
        redraws: Vec::new(),
        phase_hop_slots,
        hop_totals,
        symbol_counts: vec![
            USERS * USERS * len,
            generated.direct_order2 + generated.paired_order2,
            generated.direct_order3 + generated.combined_order3,
        ],
        generated,
        destinations: reports,
        max_residual,
        causality_checks,
        causality_violations,
        slots: log,
    };
    Ok(X3Outcome { decoded, stage })
}

#[derive(Default)]
struct Solver {
    worst: f64,
    phase1: SystemStats,
    phase2: SystemStats,
    equation_residual: f64,
}

impl Solver {
    /// Square system that is full rank for almost every channel draw.
    fn solve(&mut self, a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
        self.worst = self.worst.max(condition_number(a));
        solve_linear(a, b)
    }

    /// PLC system: records its rank, checks the first `own_rows` equations (the destination's own
    /// receptions) against the true values, and returns the minimum-norm fit.
    fn solve_plc(
        &mut self,
        phase: usize,
        a: &ComplexMatrix,
        b: &[Complex64],
        truth: &[Complex64],
        own_rows: usize,
    ) -> Result<Vec<Complex64>> {
        let r = rank(a, DEFAULT_RANK_TOL);
        let stats = if phase == 1 { &mut self.phase1 } else { &mut self.phase2 };
        stats.systems += 1;
        stats.unknowns += a.cols();
        stats.rank += r;
        if r < a.cols() {
            stats.deficient += 1;
        }
        let fitted = a.mul_vec(truth)?;
        let scale = b[..own_rows].iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
        let gap = fitted.iter().zip(b).take(own_rows).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max) / scale;
        self.equation_residual = self.equation_residual.max(gap);
        if r == a.cols() && a.rows() == a.cols() {
            self.worst = self.worst.max(condition_number(a));
            solve_linear(a, b)
        } else {
            least_squares(a, b, DEFAULT_RANK_TOL)
        }
    }
}

/// Everything destination `x` does after the last slot; returns `decoded[source]` of its own messages.
fn decode_destination(
    engine: &mut Engine<'_>,
    st: &State,
    x: usize,
) -> Result<(Vec<Vec<Complex64>>, DestinationReport)> {
    let ch = engine.channel();
    let node = NodeId::at(4, x);
    let mut solver = Solver::default();

    // Order-3 symbols: undo the hop-2 mixing of every phase-3 offload slot.
    let mut z = Vec::with_capacity(st.deliveries.len());
    for d in &st.deliveries {
        z.push(receive_delivery(engine, 3, x, d)?);
    }
    engine.require(node, &csi(st.p3_offloads.iter().map(|o| o.slot)), "undo phase-3 offload")?;
    let mut p2_direct_val = vec![None; st.p2_direct.len()];
    let mut p2_combined_val = vec![None; st.p2_combined.len()];
    for (i, off) in st.p3_offloads.iter().enumerate() {
        let sol = solver.solve(&ch.hop_matrix(2, off.slot)?, &z[3 * i..3 * i + 3])?;
        for b in 0..USERS {
            match st.o3[b][i] {
                Origin::Direct(j) => p2_direct_val[j] = Some(sol[b]),
                Origin::Combined(j) => p2_combined_val[j] = Some(sol[b]),
            }
        }
    }
    let known = |v: &[Option<Complex64>], i: usize| -> Result<Complex64> {
        v[i].ok_or_else(|| Error::Inconsistent(format!("value {i} not recovered before use")))
    };

    // Phase-2 side information: own part from the reception, the other two from the two combinations.
    let mut p2_rem_val = vec![None; st.p2_remaining.len()];
    for (ti, members) in st.p2_triples.iter().enumerate() {
        let own = members
            .iter()
            .position(|&i| st.p2_remaining[i].observer == x)
            .ok_or_else(|| Error::Grouping("triple lacks a part observed here".into()))?;
        let rec = &st.p2_remaining[members[own]];
        let slot = st.p2_groups[rec.group].group.slots[rec.row];
        engine.require(node, &[Atom::Rx { node, slot }], "own side information")?;
        let sib = direct_sibling(&st.p2_parts, rec.group, rec.row, x)?;
        let own_val = engine.received(slot, x) - known(&p2_direct_val, sib)?;
        let others: Vec<usize> = (0..members.len()).filter(|&i| i != own).collect();
        let combos = &st.p2_combined[2 * ti..2 * ti + 2];
        if combos.iter().any(|c| c.members != *members) {
            return Err(Error::Inconsistent("order-3 combinations out of step with their triples".into()));
        }
        let a = ComplexMatrix::from_fn(2, 2, |t, c| combos[t].coeffs[others[c]]);
        let rhs: Vec<Complex64> = (0..2)
            .map(|t| Ok(known(&p2_combined_val, 2 * ti + t)? - combos[t].coeffs[own] * own_val))
            .collect::<Result<_>>()?;
        let sol = solver.solve(&a, &rhs)?;
        p2_rem_val[members[own]] = Some(own_val);
        for (c, &o) in others.iter().enumerate() {
            p2_rem_val[members[o]] = Some(sol[c]);
        }
    }
    let p2_part = |g: usize, r: usize, obs: usize, src: usize| -> Result<Complex64> {
        match st.p2_parts.get(&(g, r, obs, src)) {
            Some(PartKey::Direct(i)) => known(&p2_direct_val, *i),
            Some(PartKey::Remaining(i)) => known(&p2_rem_val, *i),
            None => Err(Error::Inconsistent(format!("missing phase-2 part ({g}, {r}, {obs}, {src})"))),
        }
    };

    // Phase 2 batches for pairs containing x: PLC values, then relay symbols, then source symbols.
    let mut p1_direct_val = vec![None; st.p1_direct.len()];
    let mut p1_paired_val = vec![None; st.p1_paired.len()];
    for (pi, pair) in PAIRS.iter().enumerate() {
        if !pair.contains(&x) {
            continue;
        }
        let other_obs = (0..USERS).find(|u| !pair.contains(u)).expect("three users");
        let mut relay_vals = vec![[Complex64::default(); USERS]; st.p2_offloads[pi].len()];
        for (bi, &(bpi, j)) in st.p2_batches.iter().enumerate() {
            if bpi != pi {
                continue;
            }
            let set = &st.p2_sets[bi];
            let mut plc = HashMap::new();
            for nulled in 0..USERS {
                let gi = st.p2_group_of[&(bi, nulled)];
                let group = &st.p2_groups[gi].group;
                debug_assert_eq!(st.p2_groups[gi].batch, bi);
                let needs = merge_needs([
                    heard(node, group.slots.iter().copied()).as_slice(),
                    &csi(set.psin.slots.iter().chain(&group.slots).copied()),
                    &[Atom::Public],
                ]);
                engine.require(node, &needs, "phase-2 PLC solve")?;
                let sources: Vec<usize> = (0..USERS).filter(|&s| s != nulled).collect();
                let mut rows = Vec::with_capacity(6);
                let mut rhs = Vec::with_capacity(6);
                for r in 0..group.slots.len() {
                    let coef = part_coefficients(ch, set, group, 0, r, x);
                    rows.push((0..6).map(|u| coef[u % 3]).collect::<Vec<_>>());
                    rhs.push(engine.received(group.slots[r], x));
                }
                for r in 0..group.slots.len() {
                    let coef = part_coefficients(ch, set, group, 0, r, other_obs);
                    for (kk, &src) in sources.iter().enumerate() {
                        rows.push(
                            (0..6).map(|u| if u / 3 == kk { coef[u % 3] } else { Complex64::default() }).collect(),
                        );
                        rhs.push(p2_part(gi, r, other_obs, src)?);
                    }
                }
                let truth: Vec<Complex64> = (0..6).map(|u| set.psin.plc(u % 3, nulled, sources[u / 3]).value).collect();
                let sol = solver.solve_plc(2, &ComplexMatrix::from_rows(&rows)?, &rhs, &truth, group.slots.len())?;
                for (kk, &src) in sources.iter().enumerate() {
                    for i in 0..USERS {
                        plc.insert((nulled, src, i), sol[3 * kk + i]);
                    }
                }
            }
            for src in 0..USERS {
                let vals: Vec<Complex64> = (0..USERS)
                    .flat_map(|i| (0..USERS).filter(move |&n| n != src).map(move |n| (n, i)))
                    .map(|(n, i)| plc[&(n, src, i)])
                    .collect();
                let w = solver.solve(&set.psin.stacked_plc_matrix(src), &vals)?;
                for (t, v) in w.into_iter().enumerate() {
                    relay_vals[6 * j + t][src] = v;
                }
            }
        }
        for (i, off) in st.p2_offloads[pi].iter().enumerate() {
            engine.require(node, &[Atom::GlobalCsi(off.slot)], "undo phase-2 offload")?;
            let sol = solver.solve(&ch.hop_matrix(1, off.slot)?, &relay_vals[i])?;
            for (s, v) in sol.into_iter().enumerate() {
                match st.o2[&(pi, s)][i] {
                    Origin::Direct(k) => p1_direct_val[k] = Some(v),
                    Origin::Combined(k) => p1_paired_val[k] = Some(v),
                }
            }
        }
    }

    // Phase-1 side information: strip the own part from each pair sum.
    let mut p1_rem_val = vec![None; st.p1_remaining.len()];
    for (pg, members) in st.p1_pairs.iter().enumerate() {
        let [a, b] = members[..] else {
            return Err(Error::Grouping("phase-1 side information must come in pairs".into()));
        };
        let (partner, target) = match (st.p1_remaining[a].observer == x, st.p1_remaining[b].observer == x) {
            (true, false) => (0, 1),
            (false, true) => (1, 0),
            _ => continue,
        };
        let rec = &st.p1_remaining[members[partner]];
        let slot = st.p1_groups[rec.group].group.slots[rec.row];
        engine.require(node, &[Atom::Rx { node, slot }], "own side information")?;
        let sib = direct_sibling(&st.p1_parts, rec.group, rec.row, x)?;
        let partner_val = engine.received(slot, x) - known(&p1_direct_val, sib)?;
        let c = &st.p1_paired[pg];
        let v = (known(&p1_paired_val, pg)? - c.coeffs[partner] * partner_val) / c.coeffs[target];
        p1_rem_val[members[target]] = Some(v);
    }
    let p1_part = |g: usize, r: usize, obs: usize, src: usize| -> Result<Complex64> {
        match st.p1_parts.get(&(g, r, obs, src)) {
            Some(PartKey::Direct(i)) => known(&p1_direct_val, *i),
            Some(PartKey::Remaining(i)) => known(&p1_rem_val, *i),
            None => Err(Error::Inconsistent(format!("missing phase-1 part ({g}, {r}, {obs}, {src})"))),
        }
    };

    // Phase 1: per chunk and nulled index a 30-unknown system, then each source's stacked 6×6.
    let mut own: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); 30 * st.granules]; USERS];
    let mut blocks = 0;
    let mut full_rank_blocks = 0;
    for chunk in 0..st.granules {
        let sets = &st.p1_sets[x][5 * chunk..5 * chunk + 5];
        let mut plc = HashMap::new();
        for nulled in 0..USERS {
            let gi = st.p1_group_of[&(x, chunk, nulled)];
            let g = &st.p1_groups[gi];
            debug_assert!(g.dest == x && g.chunk == chunk);
            let group = &g.group;
            let slots =
                sets.iter().flat_map(|s| s.psin.slots.iter().chain(&s.af_slots[nulled])).chain(&group.slots).copied();
            let needs =
                merge_needs([heard(node, group.slots.iter().copied()).as_slice(), &csi(slots), &[Atom::Public]]);
            engine.require(node, &needs, "phase-1 PLC solve")?;
            let sources: Vec<usize> = (0..USERS).filter(|&s| s != nulled).collect();
            let n = 5 * 6;
            let mut rows = Vec::with_capacity(n);
            let mut rhs = Vec::with_capacity(n);
            for r in 0..group.slots.len() {
                let coefs: Vec<Vec<Complex64>> =
                    (0..sets.len()).map(|s| part_coefficients(ch, &sets[s], group, s, r, x)).collect();
                rows.push((0..n).map(|u| coefs[u / 6][u % 3]).collect::<Vec<_>>());
                rhs.push(engine.received(group.slots[r], x));
            }
            for obs in (0..USERS).filter(|&o| o != x) {
                for r in 0..group.slots.len() {
                    let coefs: Vec<Vec<Complex64>> =
                        (0..sets.len()).map(|s| part_coefficients(ch, &sets[s], group, s, r, obs)).collect();
                    for (kk, &src) in sources.iter().enumerate() {
                        rows.push(
                            (0..n)
                                .map(|u| if (u % 6) / 3 == kk { coefs[u / 6][u % 3] } else { Complex64::default() })
                                .collect(),
                        );
                        rhs.push(p1_part(gi, r, obs, src)?);
                    }
                }
            }
            let truth: Vec<Complex64> =
                (0..n).map(|u| sets[u / 6].psin.plc(u % 3, nulled, sources[(u % 6) / 3]).value).collect();
            let sol = solver.solve_plc(1, &ComplexMatrix::from_rows(&rows)?, &rhs, &truth, group.slots.len())?;
            for s in 0..sets.len() {
                for (kk, &src) in sources.iter().enumerate() {
                    for i in 0..USERS {
                        plc.insert((s, nulled, src, i), sol[6 * s + 3 * kk + i]);
                    }
                }
            }
        }
        for (s, set) in sets.iter().enumerate() {
            let b = 5 * chunk + s;
            for src in 0..USERS {
                let vals: Vec<Complex64> = (0..USERS)
                    .flat_map(|i| (0..USERS).filter(move |&n| n != src).map(move |n| (n, i)))
                    .map(|(n, i)| plc[&(s, n, src, i)])
                    .collect();
                let a = set.psin.stacked_plc_matrix(src);
                blocks += 1;
                if rank(&a, DEFAULT_RANK_TOL) == 6 {
                    full_rank_blocks += 1;
                }
                let u = solver.solve(&a, &vals)?;
                own[src][6 * b..6 * b + 6].copy_from_slice(&u);
            }
        }
    }
    let report = DestinationReport {
        destination: x + 1,
        symbols: 0,
        max_residual: 0.0,
        worst_condition: solver.worst,
        full_rank_blocks,
        blocks,
        phase1: solver.phase1,
        phase2: solver.phase2,
        equation_residual: solver.equation_residual,
    };
    Ok((own, report))
}

/// One stage with channel redraws on numerically singular draws.
pub fn run_x3_stage(messages: &Messages, seed: u64, stage: usize) -> Result<X3Outcome> {
    let len = messages.first().and_then(|m| m.first()).map_or(0, Vec::len);
    let n1 = USERS * USERS * len;
    check_n1(n1)?;
    let base = (stage as u64 - 1) * MAX_ATTEMPTS;
    let mut redraws = Vec::new();
    for attempt in 0..MAX_ATTEMPTS {
        let ch = draw_channels(NetworkShape::new(USERS, 3)?, stage_slots(n1), RandomStream::new(seed, base + attempt))?;
        let public = RandomStream::new(seed, PUBLIC_STREAM + base + attempt);
        match execute_x3(&ch, messages, public) {
            Ok(mut out) => {
                out.stage.redraws = redraws;
                return Ok(out);
            }
            Err(e @ (Error::RankDeficient { .. } | Error::Singular { .. })) => {
                redraws.push(RedrawEvent { stage, attempt, reason: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::RankDeficient { rank: 0, required: 0 })
}

/// Checks measured symbol and slot counts against the closed-form accounting.
pub fn check_concordance(stage: &StageTranscript, n1: usize) -> Result<()> {
    let p = SchemeParams::new(USERS, USERS)?;
    let profile = durations(&p, &integer(n1 as i64));
    for (m, measured) in stage.symbol_counts.iter().enumerate() {
        let expected = &profile.n[m];
        if integer(*measured as i64) != *expected {
            return Err(Error::CountMismatch {
                what: format!("N_{}", m + 1),
                measured: measured.to_string(),
                expected: expected.to_string(),
            });
        }
    }
    for m in 1..=USERS {
        for k in 1..=USERS {
            let expected = profile.t(m, k);
            let measured = stage.t(m, k);
            if integer(measured as i64) != *expected {
                return Err(Error::CountMismatch {
                    what: format!("slots of phase {m} on hop {k}"),
                    measured: measured.to_string(),
                    expected: expected.to_string(),
                });
            }
        }
    }
    Ok(())
}

fn dof_fields(n1: usize, hop_totals: &[usize]) -> (String, f64) {
    let busiest = hop_totals.iter().copied().max().unwrap_or(0).max(1);
    let r = ratio(n1 as i64, busiest as i64);
    (fraction_string(&r), to_f64(&r))
}

/// First destination whose residual is not below [`DECODE_TOL`], numbered from `offset + 1`.
pub(crate) fn decode_failure(stage: &StageTranscript, offset: usize) -> Option<Error> {
    stage
        .destinations
        .iter()
        .find(|d| d.max_residual.is_nan() || d.max_residual >= DECODE_TOL)
        .map(|d| Error::DecodeFailure { destination: d.destination + offset, residual: d.max_residual })
}

pub(crate) fn transcript(
    variant: &str,
    n1: usize,
    seed: u64,
    residual: f64,
    stages: Vec<StageTranscript>,
) -> Transcript {
    let hop_totals: Vec<usize> = stages.iter().flat_map(|s| s.hop_totals.iter().copied()).collect();
    let (dof, dof_decimal) = dof_fields(n1, &hop_totals);
    Transcript {
        variant: variant.into(),
        users: USERS,
        hops: hop_totals.len(),
        n1,
        seed,
        hop_totals,
        delivered: n1,
        max_residual: residual,
        causality_violations: stages.iter().map(|s| s.causality_violations).sum(),
        dof,
        dof_decimal,
        decode_ok: residual < DECODE_TOL,
        stages,
    }
}

/// Runs the scheme on random messages; fails only on broken invariants, reporting decode quality in the transcript.
pub fn simulate_x3(n1: usize, seed: u64) -> Result<Transcript> {
    check_n1(n1)?;
    let messages = random_messages(n1, seed)?;
    let out = run_x3_stage(&messages, seed, 1)?;
    check_concordance(&out.stage, n1)?;
    let residual = message_residual(&messages, &out.decoded);
    Ok(transcript("x3", n1, seed, residual, vec![out.stage]))
}

/// As [`simulate_x3`], and additionally fails with `DecodeFailure` unless every symbol was recovered.
pub fn run_x3(n1: usize, seed: u64) -> Result<Transcript> {
    let t = simulate_x3(n1, seed)?;
    match decode_failure(&t.stages[0], 0) {
        Some(e) => Err(e),
        None => Ok(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_n1(90), (270, true));
        assert_eq!(round_n1(270), (270, false));
        assert_eq!(round_n1(271), (540, true));
        assert_eq!(round_n1(0), (270, true));
    }

    #[test]
    fn rejects_off_granularity() {
        assert!(matches!(run_x3(90, 1), Err(Error::Domain(_))));
        assert!(matches!(random_messages(180, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn full_run_matches_accounting() {
        let t = simulate_x3(270, 7).unwrap();
        assert_eq!(t.hop_totals, vec![159, 138, 198]);
        assert_eq!(t.dof, "15/11");
        assert_eq!(t.causality_violations, 0);
        let s = &t.stages[0];
        assert_eq!(s.symbol_counts, vec![270, 162, 90]);
        assert_eq!(
            s.generated,
            GeneratedCounts { direct_order2: 108, paired_order2: 54, direct_order3: 54, combined_order3: 36 }
        );
        assert!(s.destinations.iter().all(|d| d.blocks == 15 && d.full_rank_blocks == 15));
        assert!(s.causality_checks > 0);
        assert_eq!(s.destinations.iter().map(|d| d.symbols).sum::<usize>(), 270);
    }

    #[test]
    fn plc_equations_hold_for_true_values() {
        let t = simulate_x3(270, 7).unwrap();
        for d in &t.stages[0].destinations {
            assert!(d.equation_residual < DECODE_TOL, "dest {} gap {}", d.destination, d.equation_residual);
        }
    }

    #[test]
    fn plc_systems_have_structural_rank_loss() {
        // Both sources reach every observer through the same rows, so each system misses the
        // antisymmetric directions left in the observers' common kernel.
        let t = simulate_x3(270, 7).unwrap();
        for d in &t.stages[0].destinations {
            assert_eq!(d.phase1, SystemStats { systems: 3, unknowns: 90, rank: 81, deficient: 3 });
            assert_eq!(d.phase2, SystemStats { systems: 18, unknowns: 108, rank: 90, deficient: 18 });
            assert!(!d.phase1.full_rank() && !d.phase2.full_rank());
        }
        assert!(!t.decode_ok);
        assert!(t.max_residual > 1e-3);
    }

    #[test]
    fn strict_run_reports_decode_failure() {
        match run_x3(270, 7) {
            Err(Error::DecodeFailure { destination, residual }) => {
                assert!((1..=3).contains(&destination));
                assert!(residual >= DECODE_TOL);
            }
            other => panic!("expected a decode failure, got {other:?}"),
        }
    }

    #[test]
    fn seeds_share_counts_not_values() {
        let a = simulate_x3(270, 1).unwrap();
        let b = simulate_x3(270, 2).unwrap();
        assert_eq!(a.hop_totals, b.hop_totals);
        assert_eq!(a.stages[0].phase_hop_slots, b.stages[0].phase_hop_slots);
        assert_ne!(a.stages[0].slots[0].rx, b.stages[0].slots[0].rx);
    }

    #[test]
    fn same_seed_same_transcript() {
        let a = simulate_x3(270, 3).unwrap().to_json().unwrap();
        let b = simulate_x3(270, 3).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_granules() {
        let t = simulate_x3(540, 11).unwrap();
        assert_eq!(t.hop_totals, vec![318, 276, 396]);
        assert_eq!(t.stages[0].symbol_counts, vec![540, 324, 180]);
        assert_eq!(t.causality_violations, 0);
    }
}
