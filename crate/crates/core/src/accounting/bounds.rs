//! Hop-total inequalities and the extension to longer networks.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::recursion::{durations, SchemeParams};
use super::theorem::dof_report;
use crate::error::{Error, Result};
use crate::numerics::{integer, Rational};

/// Outcome of the interior-hop checks for one (K, L).
#[derive(Debug, Clone, PartialEq)]
pub struct HopBoundReport {
    pub params: SchemeParams,
    /// Every interior hop total is at most hop 1 plus hop K.
    pub appendix_b_ok: bool,
    /// Every interior hop total is at most the larger endpoint.
    pub remark5_ok: bool,
    /// One-based hop with the largest total.
    pub max_hop_index: usize,
    pub totals: Vec<Rational>,
}

pub fn verify_hop_bounds(k: usize, l: usize) -> Result<HopBoundReport> {
    let params = SchemeParams::new(k, l)?;
    let prof = durations(&params, &integer(1));
    let first = &prof.totals[0];
    let last = &prof.totals[k - 1];
    let sum = first + last;
    let endpoint_max = if first > last { first } else { last };
    let interior = &prof.totals[1..k - 1];
    Ok(HopBoundReport {
        params,
        appendix_b_ok: interior.iter().all(|t| t <= &sum),
        remark5_ok: interior.iter().all(|t| t <= endpoint_max),
        max_hop_index: prof.max_hop().0,
        totals: prof.totals.clone(),
    })
}

/// DoF of the K-user network with `hops ≥ 2K` hops, where the extra hops amplify and forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopExtension {
    pub k: usize,
    pub hops: usize,
    pub dof: String,
    /// Normalized slots each extra hop needs: all symbol orders forwarded at K per slot.
    pub af_hop_total: String,
    pub busiest_hop_total: String,
    pub af_within_busiest: bool,
}

pub fn m_hop_extension(k: usize, hops: usize) -> Result<(Rational, HopExtension)> {
    if hops < 2 * k {
        return Err(Error::Domain(format!("extension needs at least 2K = {} hops, got {hops}", 2 * k)));
    }
    let report = dof_report(k)?;
    let params = SchemeParams::from_q(report.q_star, k)?;
    let prof = durations(&params, &integer(1));
    let af_total = prof.n.iter().fold(Rational::zero(), |a, b| a + b) / integer(k as i64);
    let busiest = prof.max_hop().1.clone();
    let ext = HopExtension {
        k,
        hops,
        dof: crate::numerics::fraction_string(&report.dof_actual),
        af_hop_total: crate::numerics::fraction_string(&af_total),
        busiest_hop_total: crate::numerics::fraction_string(&busiest),
        af_within_busiest: af_total <= busiest,
    };
    if !ext.af_within_busiest {
        return Err(Error::Domain(format!(
            "extra AF hop needs {} slots, more than the busiest hop {}",
            ext.af_hop_total, ext.busiest_hop_total
        )));
    }
    Ok((report.dof_actual, ext))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ratio;

    #[test]
    fn three_user_bounds() {
        let r = verify_hop_bounds(3, 3).unwrap();
        assert!(r.appendix_b_ok && r.remark5_ok);
        assert_eq!(r.max_hop_index, 3);
    }

    #[test]
    fn remark_five_at_hundred_users() {
        for l in [3, 7] {
            let r = verify_hop_bounds(100, l).unwrap();
            assert!(r.appendix_b_ok && r.remark5_ok, "L={l}");
        }
    }

    #[test]
    fn extension_keeps_dof() {
        let (a, ext) = m_hop_extension(3, 6).unwrap();
        let (b, _) = m_hop_extension(3, 8).unwrap();
        assert_eq!(a, ratio(15, 11));
        assert_eq!(a, b);
        assert_eq!(ext.af_hop_total, "29/45");
        assert!(m_hop_extension(3, 5).is_err());
    }

    #[test]
    fn extension_fits_on_grid() {
        for k in 3..=30 {
            let (_, ext) = m_hop_extension(k, 2 * k + 1).unwrap();
            assert!(ext.af_within_busiest, "K={k}");
        }
    }
}
