//! Six-hop interference network as two cascaded 3-hop X networks with independent channels.
//!
//! Source `j` splits its message into parts `u[j][k]`. The first X stage carries part `k` to the
//! layer-4 node `k`; the second stage carries it from node `k` to destination `j`.

use num_complex::Complex64;

use super::transcript::Transcript;
use super::x3::{check_concordance, random_messages, run_x3_stage, transcript, Messages, DECODE_TOL};
use crate::error::{Error, Result};

const USERS: usize = 3;

/// `messages[j][k]` read as `u[k][j]`: what the second stage sends from node `k` to destination `j`.
pub fn transpose(messages: &Messages) -> Messages {
    (0..USERS).map(|k| (0..USERS).map(|j| messages[j][k].clone()).collect()).collect()
}

/// Largest end-to-end error per destination `j` over all parts of source `j`'s message.
fn residual_per_destination(sent: &Messages, arrived: &Messages) -> Vec<f64> {
    (0..USERS)
        .map(|j| {
            (0..USERS)
                .flat_map(|k| {
                    sent[j][k].iter().zip(&arrived[j][k]).map(|(a, b): (&Complex64, &Complex64)| (a - b).norm())
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Both stages on random messages; `N₁` counts interference-network symbols.
pub fn simulate_ic6(n1: usize, seed: u64) -> Result<(Transcript, Vec<f64>)> {
    let sent = random_messages(n1, seed)?;
    let first = run_x3_stage(&sent, seed, 1)?;
    check_concordance(&first.stage, n1)?;
    let relayed = transpose(&first.decoded);
    let second = run_x3_stage(&relayed, seed, 2)?;
    check_concordance(&second.stage, n1)?;
    let arrived = transpose(&second.decoded);
    let per_dest = residual_per_destination(&sent, &arrived);
    let residual = per_dest.iter().copied().fold(0.0, f64::max);
    Ok((transcript("ic6", n1, seed, residual, vec![first.stage, second.stage]), per_dest))
}

/// As [`simulate_ic6`], failing with `DecodeFailure` at the worst destination unless every symbol arrived.
pub fn run_ic6(n1: usize, seed: u64) -> Result<Transcript> {
    let (t, per_dest) = simulate_ic6(n1, seed)?;
    let (worst, residual) =
        per_dest.iter().copied().enumerate().fold((0, 0.0), |acc, (j, r)| if r > acc.1 { (j, r) } else { acc });
    if residual.is_nan() || residual >= DECODE_TOL {
        return Err(Error::DecodeFailure { destination: worst + 1, residual });
    }
    Ok(t)
}
