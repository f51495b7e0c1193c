//! Partial scheduling and interference nulling (PSIN).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::engine::{csi, heard, Engine};
use super::symbols::merge_needs;
use crate::error::{Error, Result};
use crate::network::{draw_channels, Atom, NetworkShape, NodeId};
use crate::numerics::{
    condition_number, dot, left_null_vector, max_abs, rank, ComplexMatrix, RandomStream, DEFAULT_RANK_TOL,
};

/// How receivers compute their null vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nulling {
    /// Unit-norm left null vector from the SVD.
    Canonical,
    /// Closed form `(−1/h(1), …, −1/h(T−1), 1/h(T))` for identity-plus-sum precoders.
    ChannelInverse,
}

/// One PSIN batch: L scheduled transmitters of layer `m`, each with `K(L−1)` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct PsinBatch {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub dest_set: Vec<usize>,
    /// Zero-based positions of the scheduled transmitters.
    pub transmitters: Vec<usize>,
    pub symbols: Vec<Vec<Complex64>>,
    /// Knowledge each transmitter needs to hold its symbols.
    pub needs: Vec<Vec<Atom>>,
    /// `(K(L−1)+1) × K(L−1)` precoder per transmitter.
    pub precoders: Vec<ComplexMatrix>,
    pub nulling: Nulling,
}

impl PsinBatch {
    /// Batch with public random Gaussian precoders.
    #[allow(clippy::too_many_arguments)]
    pub fn random(
        k: usize,
        l: usize,
        m: usize,
        dest_set: Vec<usize>,
        transmitters: Vec<usize>,
        symbols: Vec<Vec<Complex64>>,
        needs: Vec<Vec<Atom>>,
        precoder_stream: RandomStream,
    ) -> Result<Self> {
        let cols = k * (l - 1);
        let mut rng = precoder_stream.rng();
        let precoders = (0..l).map(|_| ComplexMatrix::from_fn(cols + 1, cols, |_, _| rng.complex_normal())).collect();
        let b = Self { k, l, m, dest_set, transmitters, symbols, needs, precoders, nulling: Nulling::Canonical };
        b.validate()?;
        Ok(b)
    }

    /// Batch where each transmitter sends its symbols one per slot, then their sum.
    #[allow(clippy::too_many_arguments)]
    pub fn sum_redundancy(
        k: usize,
        l: usize,
        m: usize,
        dest_set: Vec<usize>,
        transmitters: Vec<usize>,
        symbols: Vec<Vec<Complex64>>,
        needs: Vec<Vec<Atom>>,
    ) -> Result<Self> {
        let cols = k * (l - 1);
        let one = Complex64::new(1.0, 0.0);
        let c =
            ComplexMatrix::from_fn(cols + 1, cols, |t, j| if t == cols || t == j { one } else { Complex64::default() });
        let precoders = vec![c; l];
        let b = Self { k, l, m, dest_set, transmitters, symbols, needs, precoders, nulling: Nulling::ChannelInverse };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        let cols = self.k * (self.l - 1);
        let bad = |msg: String| Err(Error::Domain(msg));
        if self.l < 2 || self.l > self.k {
            return bad(format!("need 2 <= L <= K, got L={} K={}", self.l, self.k));
        }
        if self.transmitters.len() != self.l || self.symbols.len() != self.l || self.needs.len() != self.l {
            return bad("one transmitter, symbol vector and knowledge list per scheduled node".into());
        }
        if self.transmitters.iter().any(|&t| t >= self.k) {
            return bad("transmitter position out of range".into());
        }
        let mut sorted = self.transmitters.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.l {
            return bad("scheduled transmitters must be distinct".into());
        }
        if self.symbols.iter().any(|s| s.len() != cols) {
            return bad(format!("each transmitter needs exactly {cols} symbols"));
        }
        if self.precoders.iter().any(|c| c.rows() != cols + 1 || c.cols() != cols) {
            return bad("precoder shape must be (K(L-1)+1) x K(L-1)".into());
        }
        Ok(())
    }

    pub fn slot_count(&self) -> usize {
        self.k * (self.l - 1) + 1
    }

    pub fn symbol_count(&self) -> usize {
        self.k * self.l * (self.l - 1)
    }
}

/// Contribution of transmitter `source` at `receiver` after nulling transmitter `nulled`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialLinearCombination {
    pub receiver: usize,
    /// Index into the batch's transmitter list.
    pub nulled: usize,
    /// Index into the batch's transmitter list.
    pub source: usize,
    pub dest_set: Vec<usize>,
    pub coeff_row: Vec<Complex64>,
    pub value: Complex64,
}

/// Receiver-side combination free of one transmitter's symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NulledCombination {
    pub receiver: usize,
    pub nulled: usize,
    pub omega: Vec<Complex64>,
    pub value: Complex64,
    /// One entry per transmitter other than `nulled`, in transmitter order.
    pub plcs: Vec<PartialLinearCombination>,
}

/// Everything receivers of a PSIN batch obtain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsinOutput {
    pub slots: Vec<usize>,
    /// `combos[receiver][nulled]`.
    pub combos: Vec<Vec<NulledCombination>>,
}

impl PsinOutput {
    pub fn combination(&self, receiver: usize, nulled: usize) -> &NulledCombination {
        &self.combos[receiver][nulled]
    }

    /// PLC of transmitter `source` at `receiver` when `nulled` is removed.
    pub fn plc(&self, receiver: usize, nulled: usize, source: usize) -> &PartialLinearCombination {
        self.combos[receiver][nulled]
            .plcs
            .iter()
            .find(|p| p.source == source)
            .expect("no PLC for the nulled transmitter itself")
    }

    /// Rows `(receiver, nulled ≠ source)` of the coefficients over `source`'s symbols.
    pub fn stacked_plc_matrix(&self, source: usize) -> ComplexMatrix {
        let l = self.combos.first().map_or(0, Vec::len);
        let rows: Vec<Vec<Complex64>> = (0..self.combos.len())
            .flat_map(|i| (0..l).filter(move |&n| n != source).map(move |n| (i, n)))
            .map(|(i, n)| self.plc(i, n, source).coeff_row.clone())
            .collect();
        ComplexMatrix::from_rows(&rows).expect("PLC rows have equal length")
    }

    /// Value of every `(receiver, nulled ≠ source)` PLC, in [`stacked_plc_matrix`](Self::stacked_plc_matrix) order.
    pub fn stacked_plc_values(&self, source: usize) -> Vec<Complex64> {
        let l = self.combos.first().map_or(0, Vec::len);
        (0..self.combos.len())
            .flat_map(|i| (0..l).filter(move |&n| n != source).map(move |n| (i, n)))
            .map(|(i, n)| self.plc(i, n, source).value)
            .collect()
    }
}

fn effective(batch: &PsinBatch, engine: &Engine<'_>, slots: &[usize], receiver: usize, idx: usize) -> ComplexMatrix {
    let ch = engine.channel();
    let mut m = batch.precoders[idx].clone();
    for (t, &slot) in slots.iter().enumerate() {
        m.scale_row(t, ch.h(batch.m, slot, receiver, batch.transmitters[idx]));
    }
    m
}

/// Transmits one PSIN batch over hop `batch.m` and computes every receiver's nulled combinations.
pub fn psin_run(engine: &mut Engine<'_>, phase: usize, batch: &PsinBatch) -> Result<PsinOutput> {
    let k = engine.users();
    if k != batch.k {
        return Err(Error::Dimension(format!("batch built for K={} on a {k}-user network", batch.k)));
    }
    let mut slots = Vec::with_capacity(batch.slot_count());
    for t in 0..batch.slot_count() {
        let mut x = vec![None; k];
        for (idx, &pos) in batch.transmitters.iter().enumerate() {
            let node = NodeId::at(batch.m, pos);
            let needs = merge_needs([batch.needs[idx].as_slice(), &[Atom::Public]]);
            engine.require(node, &needs, "psin transmit")?;
            x[pos] = Some(dot(batch.precoders[idx].row(t), &batch.symbols[idx]));
        }
        let (slot, _) = engine.transmit(phase, batch.m, x)?;
        slots.push(slot);
    }

    let mut combos = Vec::with_capacity(k);
    for i in 0..k {
        let node = NodeId::at(batch.m + 1, i);
        let needs =
            merge_needs([heard(node, slots.iter().copied()).as_slice(), &csi(slots.iter().copied()), &[Atom::Public]]);
        engine.require(node, &needs, "psin nulling")?;
        let y: Vec<Complex64> = slots.iter().map(|&s| engine.received(s, i)).collect();
        let mut per_receiver = Vec::with_capacity(batch.l);
        for nulled in 0..batch.l {
            let m_nulled = effective(batch, engine, &slots, i, nulled);
            let omega = match batch.nulling {
                Nulling::Canonical => left_null_vector(&m_nulled)?,
                Nulling::ChannelInverse => {
                    let last = slots.len() - 1;
                    let ch = engine.channel();
                    let pos = batch.transmitters[nulled];
                    let one = Complex64::new(1.0, 0.0);
                    slots
                        .iter()
                        .enumerate()
                        .map(|(t, &s)| {
                            let h = ch.h(batch.m, s, i, pos);
                            if t == last {
                                one / h
                            } else {
                                -one / h
                            }
                        })
                        .collect()
                }
            };
            let leak = max_abs(&m_nulled.left_mul_vec(&omega)?);
            let scale = max_abs(&omega) * m_nulled.max_abs();
            if leak > 1e-9 * scale.max(1.0) {
                return Err(Error::RankDeficient { rank: batch.slot_count() - 2, required: batch.slot_count() - 1 });
            }
            let value = dot(&omega, &y);
            let mut plcs = Vec::with_capacity(batch.l - 1);
            for source in (0..batch.l).filter(|&s| s != nulled) {
                let coeff_row = effective(batch, engine, &slots, i, source).left_mul_vec(&omega)?;
                let plc_value = dot(&coeff_row, &batch.symbols[source]);
                plcs.push(PartialLinearCombination {
                    receiver: i,
                    nulled,
                    source,
                    dest_set: batch.dest_set.clone(),
                    coeff_row,
                    value: plc_value,
                });
            }
            let total: Complex64 = plcs.iter().map(|p| p.value).sum();
            let mag = plcs.iter().map(|p| p.value.norm()).sum::<f64>() + value.norm();
            if (total - value).norm() > 1e-9 * mag.max(1.0) {
                return Err(Error::Inconsistent(format!(
                    "PSIN combination at receiver {i} does not split into its PLCs (gap {:e})",
                    (total - value).norm()
                )));
            }
            per_receiver.push(NulledCombination { receiver: i, nulled, omega, value, plcs });
        }
        combos.push(per_receiver);
    }
    Ok(PsinOutput { slots, combos })
}

/// The three-user, three-transmitter PSIN with identity-plus-sum precoding and closed-form nulling.
///
/// Fails with `RankDeficient` unless every source's six PLCs determine its six symbols.
pub fn psin_hop1_3user(
    engine: &mut Engine<'_>,
    phase: usize,
    hop: usize,
    dest_set: Vec<usize>,
    symbols: Vec<Vec<Complex64>>,
    needs: Vec<Vec<Atom>>,
) -> Result<(PsinBatch, PsinOutput)> {
    let batch = PsinBatch::sum_redundancy(3, 3, hop, dest_set, vec![0, 1, 2], symbols, needs)?;
    let out = psin_run(engine, phase, &batch)?;
    for source in 0..3 {
        let r = rank(&out.stacked_plc_matrix(source), DEFAULT_RANK_TOL);
        if r < 6 {
            return Err(Error::RankDeficient { rank: r, required: 6 });
        }
    }
    Ok((batch, out))
}

/// Result of one Monte Carlo draw of the stacked-PLC rank property.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTrial {
    pub trial: u64,
    pub full_rank: bool,
    /// Largest condition number over the stacked matrices of all transmitters.
    pub worst_condition: f64,
}

/// One random PSIN batch on hop 1 of a fresh `K`-user network; checks every stacked PLC matrix.
pub fn plc_rank_trial(k: usize, l: usize, seed: u64, trial: u64) -> Result<RankTrial> {
    let cols = k * (l - 1);
    let shape = NetworkShape::new(k, 1)?;
    let ch = draw_channels(shape, cols + 1, RandomStream::new(seed, 2 * trial))?;
    let mut engine = Engine::new(&ch);
    let mut rng = RandomStream::new(seed, 2 * trial + 1).rng();
    let symbols: Vec<Vec<Complex64>> = (0..l).map(|_| rng.complex_vec(cols)).collect();
    let transmitters: Vec<usize> = (0..l).map(|i| (i + trial as usize) % k).collect();
    let needs = transmitters
        .iter()
        .map(|&pos| {
            let id = engine.ledger.grant(NodeId::at(1, pos), 1);
            vec![Atom::OwnMessage(id)]
        })
        .collect();
    let batch = PsinBatch::random(
        k,
        l,
        1,
        vec![0],
        transmitters,
        symbols,
        needs,
        RandomStream::new(seed ^ 0x005e_ed0f_c0de, trial),
    )?;
    let out = match psin_run(&mut engine, 1, &batch) {
        Ok(out) => out,
        Err(Error::RankDeficient { .. }) => {
            return Ok(RankTrial { trial, full_rank: false, worst_condition: f64::INFINITY });
        }
        Err(e) => return Err(e),
    };
    let mut full_rank = true;
    let mut worst: f64 = 0.0;
    for source in 0..l {
        let m = out.stacked_plc_matrix(source);
        full_rank &= rank(&m, DEFAULT_RANK_TOL) == cols;
        worst = worst.max(condition_number(&m));
    }
    Ok(RankTrial { trial, full_rank, worst_condition: worst })
}
