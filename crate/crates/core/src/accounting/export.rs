//! File formats for tables and curves: exact values as `"num/den"` strings next to decimals.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::recursion::DurationProfile;
use super::scaling::ScalingPoint;
use super::theorem::DofReport;
use crate::error::{Error, Result};
use crate::numerics::{fraction_string, to_f64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopRow {
    pub k: usize,
    pub exact: String,
    pub decimal: f64,
}

pub fn hop_rows(profile: &DurationProfile) -> Vec<HopRow> {
    profile
        .totals
        .iter()
        .enumerate()
        .map(|(i, t)| HopRow { k: i + 1, exact: fraction_string(t), decimal: to_f64(t) })
        .collect()
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Domain(format!("write failed: {e}"))
}

fn write_csv<T: Serialize>(rows: impl IntoIterator<Item = T>, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `dof_table.json`: one object per K, sorted by K.
pub fn write_dof_table_json(reports: &[DofReport], out: impl Write) -> Result<()> {
    let mut records: Vec<_> = reports.iter().map(DofReport::record).collect();
    records.sort_by_key(|r| r.k);
    serde_json::to_writer_pretty(out, &records).map_err(io)
}

/// `hop_durations.csv`: columns `k, exact, decimal`.
pub fn write_hop_durations_csv(profile: &DurationProfile, out: impl Write) -> Result<()> {
    write_csv(hop_rows(profile), out)
}

/// `scaling.csv`: columns `k, f_inv, q, dof, dof_decimal, ratio`.
pub fn write_scaling_csv(points: &[ScalingPoint], out: impl Write) -> Result<()> {
    let mut records: Vec<_> = points.iter().map(ScalingPoint::record).collect();
    records.sort_by_key(|r| r.k);
    write_csv(records, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accounting::{dof_report, durations, scaling_curve, SchemeParams};
    use crate::numerics::integer;

    #[test]
    fn hop_csv_three_user() {
        let prof = durations(&SchemeParams::new(3, 3).unwrap(), &integer(1));
        let mut buf = Vec::new();
        write_hop_durations_csv(&prof, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,exact,decimal");
        assert!(lines[1].starts_with("1,53/90,0.5888"));
        assert!(lines[3].starts_with("3,11/15,"));
    }

    #[test]
    fn dof_json_sorted_with_fractions() {
        let reports = vec![dof_report(5).unwrap(), dof_report(3).unwrap()];
        let mut buf = Vec::new();
        write_dof_table_json(&reports, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v[0]["k"], 3);
        assert_eq!(v[0]["dof_actual"], "15/11");
        assert_eq!(v[1]["dof_actual"], "315/193");
    }

    #[test]
    fn scaling_csv_header() {
        let pts = scaling_curve(&[10]).unwrap();
        let mut buf = Vec::new();
        write_scaling_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("k,f_inv,q,dof,dof_decimal,ratio\n10,"));
    }
}
