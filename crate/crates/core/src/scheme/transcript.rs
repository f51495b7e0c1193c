//! Serializable record of a simulation run.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::engine::SlotRecord;
use crate::error::{Error, Result};

/// A channel redraw after a numerically singular draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedrawEvent {
    pub stage: usize,
    pub attempt: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseHopCount {
    pub phase: usize,
    pub hop: usize,
    pub slots: usize,
}

/// How the higher-order symbols of a run came about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GeneratedCounts {
    pub direct_order2: usize,
    pub paired_order2: usize,
    pub direct_order3: usize,
    pub combined_order3: usize,
}

/// Size and rank of the PLC systems a destination assembled in one phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SystemStats {
    pub systems: usize,
    pub unknowns: usize,
    /// Sum of the numerical ranks.
    pub rank: usize,
    /// Systems whose rank fell short of their unknown count.
    pub deficient: usize,
}

impl SystemStats {
    pub fn full_rank(&self) -> bool {
        self.rank == self.unknowns
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationReport {
    pub destination: usize,
    pub symbols: usize,
    pub max_residual: f64,
    /// Largest condition number over the square full-rank solves.
    pub worst_condition: f64,
    /// Six-symbol blocks whose stacked PLC matrix had full rank.
    pub full_rank_blocks: usize,
    pub blocks: usize,
    pub phase1: SystemStats,
    pub phase2: SystemStats,
    /// Largest `|A·v − b|` over the rows built from the destination's own receptions, with `v` the
    /// true PLC values, relative to `|b|`.
    pub equation_residual: f64,
}

/// One pass of the three-phase scheme over a 3-hop network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTranscript {
    pub channel_seed: u64,
    pub channel_stream: u64,
    pub public_stream: u64,
    pub redraws: Vec<RedrawEvent>,
    pub phase_hop_slots: Vec<PhaseHopCount>,
    pub hop_totals: Vec<usize>,
    /// Measured `N_1, N_2, N_3`.
    pub symbol_counts: Vec<usize>,
    pub generated: GeneratedCounts,
    pub destinations: Vec<DestinationReport>,
    pub max_residual: f64,
    pub causality_checks: usize,
    pub causality_violations: usize,
    pub slots: Vec<SlotRecord>,
}

impl StageTranscript {
    /// Slots spent in phase `m` on hop `k`.
    pub fn t(&self, phase: usize, hop: usize) -> usize {
        self.phase_hop_slots.iter().find(|c| c.phase == phase && c.hop == hop).map_or(0, |c| c.slots)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub variant: String,
    pub users: usize,
    pub hops: usize,
    pub n1: usize,
    pub seed: u64,
    pub stages: Vec<StageTranscript>,
    /// Per-hop totals over the whole network (stages concatenated).
    pub hop_totals: Vec<usize>,
    pub delivered: usize,
    pub max_residual: f64,
    pub causality_violations: usize,
    /// `N₁ / max hop total` as `"n/d"`.
    pub dof: String,
    pub dof_decimal: f64,
    /// Whether every delivered symbol matched its original within the decode tolerance.
    pub decode_ok: bool,
}

impl Transcript {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Inconsistent(format!("transcript serialization: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Domain(format!("transcript parse: {e}")))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
        f.write_all(self.to_json()?.as_bytes()).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))
    }

    /// Per-(phase, hop) slot counts and residuals as CSV.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Inconsistent(format!("csv: {e}"));
        w.write_record(["stage", "phase", "hop", "slots"]).map_err(csv_err)?;
        for (s, stage) in self.stages.iter().enumerate() {
            for c in &stage.phase_hop_slots {
                w.write_record([(s + 1).to_string(), c.phase.to_string(), c.hop.to_string(), c.slots.to_string()])
                    .map_err(csv_err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Inconsistent(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Inconsistent(format!("csv: {e}")))
    }
}
