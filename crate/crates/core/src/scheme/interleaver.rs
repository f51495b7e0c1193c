//! Phase-hop interleaver: round `b` runs its sub-blocks in consecutive blocks `b, b+1, …`, so in steady
//! state every block carries one sub-block of each (phase, hop), each from a different round.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::accounting::{dof_report, durations, SchemeParams};
use crate::error::{Error, Result};
use crate::numerics::{fraction_string, integer, ratio, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// 3-user 3-hop X network.
    X3,
    /// K-user K-hop X network.
    GeneralK,
    /// 3-user 2-hop interference network.
    TwoHop,
}

/// Transmission over hop `hop` during phase `phase` of round `round` (all one-based), placed in `block`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubBlock {
    pub phase: usize,
    pub hop: usize,
    pub round: usize,
    /// Zero-based block index.
    pub block: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleaverPlan {
    pub k: usize,
    pub rounds: usize,
    pub variant: Variant,
    pub sub_blocks_per_round: usize,
    pub block_count: usize,
    pub assignment: Vec<SubBlock>,
    /// Normalized slots of each (phase, hop) per round, as `"n/d"`.
    pub durations: BTreeMap<String, String>,
    /// Normalized length of one block: the largest per-round hop total, as `"n/d"`.
    pub block_length: String,
}

/// Per-round (phase, hop) sequence in execution order with its normalized duration.
fn sequence(k: usize, variant: Variant) -> Result<Vec<((usize, usize), Rational)>> {
    match variant {
        Variant::TwoHop => {
            if k != 3 {
                return Err(Error::Domain(format!("the two-hop plan is defined for 3 users, got {k}")));
            }
            Ok(vec![((1, 1), ratio(7, 18)), ((1, 2), ratio(1, 4)), ((2, 1), ratio(1, 4)), ((2, 2), ratio(4, 9))])
        }
        Variant::X3 | Variant::GeneralK => {
            if variant == Variant::X3 && k != 3 {
                return Err(Error::Domain(format!("the x3 plan is defined for 3 users, got {k}")));
            }
            let l = if variant == Variant::X3 { 3 } else { dof_report(k)?.q_star + 1 };
            let profile = durations(&SchemeParams::new(k, l)?, &integer(1));
            let mut seq = Vec::new();
            for m in 1..=k {
                for hop in m.saturating_sub(1).max(1)..=k {
                    seq.push(((m, hop), profile.t(m, hop).clone()));
                }
            }
            Ok(seq)
        }
    }
}

/// Places `rounds` rounds of the scheme on consecutive blocks.
pub fn build_interleaver(k: usize, rounds: usize, variant: Variant) -> Result<InterleaverPlan> {
    if rounds == 0 {
        return Err(Error::Domain("at least one round is required".into()));
    }
    let seq = sequence(k, variant)?;
    let per_round = seq.len();
    let assignment = (1..=rounds)
        .flat_map(|b| {
            seq.iter().enumerate().map(move |(s, &((phase, hop), _))| SubBlock {
                phase,
                hop,
                round: b,
                block: b - 1 + s,
            })
        })
        .collect();
    let mut totals: BTreeMap<usize, Rational> = BTreeMap::new();
    for ((_, hop), t) in &seq {
        *totals.entry(*hop).or_insert_with(Rational::zero) += t;
    }
    let block = totals.values().max().cloned().unwrap_or_else(Rational::zero);
    Ok(InterleaverPlan {
        k,
        rounds,
        variant,
        sub_blocks_per_round: per_round,
        block_count: rounds + per_round - 1,
        assignment,
        durations: seq.iter().map(|((m, h), t)| (format!("{m},{h}"), fraction_string(t))).collect(),
        block_length: fraction_string(&block),
    })
}

/// Outcome of checking a plan block by block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleaverScan {
    /// Blocks holding the same (phase, hop) twice.
    pub collisions: usize,
    /// Blocks in which some hop is busy longer than one block.
    pub overloads: usize,
    /// Sub-blocks not strictly after their predecessor in the same round.
    pub order_violations: usize,
    /// Largest per-block hop load relative to the block length, as `"n/d"`.
    pub peak_load: String,
}

impl InterleaverScan {
    pub fn clean(&self) -> bool {
        self.collisions == 0 && self.overloads == 0 && self.order_violations == 0
    }
}

/// Checks every block of `plan`.
pub fn scan_interleaver(plan: &InterleaverPlan) -> Result<InterleaverScan> {
    let seq = sequence(plan.k, plan.variant)?;
    let length: BTreeMap<(usize, usize), Rational> = seq.into_iter().collect();
    let block_len = length.iter().fold(BTreeMap::new(), |mut acc: BTreeMap<usize, Rational>, ((_, h), t)| {
        *acc.entry(*h).or_insert_with(Rational::zero) += t;
        acc
    });
    let block_len = block_len.into_values().max().unwrap_or_else(Rational::zero);
    let mut per_block: Vec<Vec<&SubBlock>> = vec![Vec::new(); plan.block_count];
    for sb in &plan.assignment {
        per_block
            .get_mut(sb.block)
            .ok_or_else(|| Error::Index(format!("sub-block placed in block {} of {}", sb.block, plan.block_count)))?
            .push(sb);
    }
    let (mut collisions, mut overloads) = (0, 0);
    let mut peak = Rational::zero();
    for subs in &per_block {
        let mut seen = std::collections::BTreeSet::new();
        if subs.iter().any(|s| !seen.insert((s.phase, s.hop))) {
            collisions += 1;
        }
        let mut load: BTreeMap<usize, Rational> = BTreeMap::new();
        for s in subs {
            *load.entry(s.hop).or_insert_with(Rational::zero) += &length[&(s.phase, s.hop)];
        }
        let worst = load.into_values().max().unwrap_or_else(Rational::zero);
        if worst > block_len {
            overloads += 1;
        }
        if !block_len.is_zero() {
            peak = peak.max(&worst / &block_len);
        }
    }
    let mut order_violations = 0;
    for b in 1..=plan.rounds {
        let blocks: Vec<usize> = plan.assignment.iter().filter(|s| s.round == b).map(|s| s.block).collect();
        order_violations += blocks.windows(2).filter(|w| w[1] <= w[0]).count();
    }
    Ok(InterleaverScan { collisions, overloads, order_violations, peak_load: fraction_string(&peak) })
}
