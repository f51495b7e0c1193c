//! Real special functions: the gamma function and the inverse of `x^x`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

/// Gamma function for positive real arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("gamma_fn needs x > 0, got {x}")));
    }
    if x < 0.5 {
        // Reflection keeps the approximation inside its accurate region.
        return Ok(PI / ((PI * x).sin() * gamma_fn(1.0 - x)?));
    }
    if x == x.floor() && x <= 171.0 {
        return Ok((1..x as u64).map(|k| k as f64).product());
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok((2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z))
}

/// Natural log of the gamma function for positive real arguments.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("ln_gamma needs x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok((PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// Inverse of `x ↦ x^x` on `x ≥ 1`, by bisection on `x·ln x − ln k`.
pub fn xx_inverse(k: f64) -> Result<f64> {
    if !k.is_finite() || k < 1.0 {
        return Err(Error::Domain(format!("xx_inverse needs k >= 1, got {k}")));
    }
    let target = k.ln();
    let g = |x: f64| x * x.ln() - target;
    let (mut lo, mut hi) = (1.0_f64, (target + 1.0).max(3.0));
    if g(lo) >= 0.0 {
        return Ok(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if g(hi).abs() < g(lo).abs() { hi } else { lo })
}
