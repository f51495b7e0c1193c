//! Hop-K and hop-1 duration closed forms, the achievable DoF and the MISO broadcast bound.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::recursion::{durations, SchemeParams};
use crate::error::Result;
use crate::numerics::{fraction_string, gamma_fn, integer, ln_gamma, ratio, to_f64, Rational};

/// Normalized hop-K duration, evaluated exactly.
///
/// Nested evaluation keeps numerator and denominator unreduced and reduces once at the end,
/// which keeps K in the tens of thousands cheap.
pub fn t1_exact(q: usize, k: usize) -> Result<Rational> {
    let p = SchemeParams::from_q(q, k)?;
    let (k, q) = (p.k() as i64, p.q() as i64);
    let weight = |i: i64| BigInt::from(q * (k - i) + 1);
    // Innermost term i = K.
    let mut num = BigInt::one();
    let mut den = weight(k);
    for i in (1..k).rev() {
        let step_num = BigInt::from((k - i) * (q * (i + 1) - 1));
        let step_den = BigInt::from((i + 1) * (q * (k - i) + 1));
        let w = weight(i);
        // R_i = 1/w + (step_num/step_den)·(num/den)
        let new_num = &den * &step_den + &w * &step_num * &num;
        den = den * step_den * w;
        num = new_num;
    }
    Ok(Rational::new(num, den))
}

/// Hop-K duration from the gamma-function closed form.
pub fn t1_gamma(q: usize, k: usize) -> Result<f64> {
    let p = SchemeParams::from_q(q, k)?;
    let a = 1.0 / p.q() as f64;
    let kf = p.k() as f64;
    let ratio = if kf + a < 170.0 {
        gamma_fn(a)? * gamma_fn(kf)? / gamma_fn(kf + a)?
    } else {
        (ln_gamma(a)? + ln_gamma(kf)? - ln_gamma(kf + a)?).exp()
    };
    Ok((ratio - 1.0 / kf) / (p.q() as f64 - 1.0))
}

/// Normalized hop-1 duration.
pub fn t2(q: usize, k: usize) -> Result<Rational> {
    let p = SchemeParams::from_q(q, k)?;
    let (k, q) = (p.k() as i64, p.q() as i64);
    Ok(ratio(k * q + 1, q * (q + 1) * k) + ratio((2 * q - 1) * (k - 1), 2 * k * ((k - 1) * q + 1)))
}

/// Hop-1 duration written in terms of `α = 1/q`.
pub fn t2_alpha_form(q: usize, k: usize) -> Result<Rational> {
    let p = SchemeParams::from_q(q, k)?;
    let a = p.alpha();
    let k = integer(p.k() as i64);
    let one = integer(1);
    let two = integer(2);
    let first = &a * (&k + &a) / ((&one + &a) * &k);
    let second = (&two - &a) * (&k - &one) / (&two * &k * (&k + &a - &one));
    Ok(first + second)
}

/// `K / H_K`, the MISO broadcast channel DoF with delayed CSI.
pub fn miso_bc_upper(k: usize) -> Rational {
    let harmonic = (1..=k as i64).fold(Rational::zero(), |acc, i| acc + ratio(1, i));
    integer(k as i64) / harmonic
}

/// `1 / max(t1, t2)` at a given q.
pub fn dof_at(q: usize, k: usize) -> Result<Rational> {
    let a = t1_exact(q, k)?;
    let b = t2(q, k)?;
    Ok(Rational::one() / if a > b { a } else { b })
}

/// Achievable DoF summary for one K at its best q.
#[derive(Debug, Clone, PartialEq)]
pub struct DofReport {
    pub k: usize,
    pub q_star: usize,
    pub t1: Rational,
    pub t2: Rational,
    pub dof_relaxed: Rational,
    pub dof_actual: Rational,
    pub miso_bc_upper: Rational,
    pub t1_float_gamma: f64,
}

/// Serializable view with exact values as `"num/den"` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofRecord {
    pub k: usize,
    pub q_star: usize,
    pub t1: String,
    pub t2: String,
    pub dof_relaxed: String,
    pub dof_relaxed_decimal: f64,
    pub dof_actual: String,
    pub dof_actual_decimal: f64,
    pub miso_bc_upper: String,
    pub miso_bc_upper_decimal: f64,
    pub t1_float_gamma: f64,
}

impl DofReport {
    pub fn record(&self) -> DofRecord {
        DofRecord {
            k: self.k,
            q_star: self.q_star,
            t1: fraction_string(&self.t1),
            t2: fraction_string(&self.t2),
            dof_relaxed: fraction_string(&self.dof_relaxed),
            dof_relaxed_decimal: to_f64(&self.dof_relaxed),
            dof_actual: fraction_string(&self.dof_actual),
            dof_actual_decimal: to_f64(&self.dof_actual),
            miso_bc_upper: fraction_string(&self.miso_bc_upper),
            miso_bc_upper_decimal: to_f64(&self.miso_bc_upper),
            t1_float_gamma: self.t1_float_gamma,
        }
    }
}

/// Best achievable DoF over `q ∈ [2, K−1]`, smallest q on ties.
pub fn dof_report(k: usize) -> Result<DofReport> {
    SchemeParams::new(k, 3)?;
    let mut best: Option<(usize, Rational, Rational, Rational)> = None;
    for q in 2..k {
        let a = t1_exact(q, k)?;
        let b = t2(q, k)?;
        let dof = Rational::one() / if a > b { &a } else { &b };
        if best.as_ref().is_none_or(|(_, _, _, d)| &dof > d) {
            best = Some((q, a, b, dof));
        }
    }
    let (q_star, t1, t2, dof_actual) = best.expect("q range is nonempty for K >= 3");
    Ok(DofReport {
        k,
        q_star,
        dof_relaxed: Rational::one() / (&t1 + &t2),
        t1_float_gamma: t1_gamma(q_star, k)?,
        t1,
        t2,
        dof_actual,
        miso_bc_upper: miso_bc_upper(k),
    })
}

/// Hop-K and hop-1 totals from the full duration table (independent of the closed forms).
pub fn endpoint_totals(q: usize, k: usize) -> Result<(Rational, Rational)> {
    let p = SchemeParams::from_q(q, k)?;
    let prof = durations(&p, &integer(1));
    Ok((prof.totals[k - 1].clone(), prof.totals[0].clone()))
}
