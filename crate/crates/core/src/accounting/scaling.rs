//! Growth of the achievable DoF against the inverse of `x^x`.

use serde::{Deserialize, Serialize};

use super::theorem::dof_at;
use crate::error::{Error, Result};
use crate::numerics::{fraction_string, to_f64, xx_inverse, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub k: usize,
    pub f_inv: f64,
    pub q: usize,
    pub dof_actual: Rational,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub k: usize,
    pub f_inv: f64,
    pub q: usize,
    pub dof: String,
    pub dof_decimal: f64,
    pub ratio: f64,
}

impl ScalingPoint {
    pub fn record(&self) -> ScalingRecord {
        ScalingRecord {
            k: self.k,
            f_inv: self.f_inv,
            q: self.q,
            dof: fraction_string(&self.dof_actual),
            dof_decimal: to_f64(&self.dof_actual),
            ratio: self.ratio,
        }
    }
}

/// Evaluates the DoF at `q = clamp(round(f⁻¹(K)), 2, K−1)` for each K.
pub fn scaling_point(k: usize) -> Result<ScalingPoint> {
    if k < 3 {
        return Err(Error::Domain(format!("K must be at least 3, got {k}")));
    }
    let f_inv = xx_inverse(k as f64)?;
    let q = (f_inv.round() as usize).clamp(2, k - 1);
    let dof_actual = dof_at(q, k)?;
    let ratio = to_f64(&dof_actual) / f_inv;
    Ok(ScalingPoint { k, f_inv, q, dof_actual, ratio })
}

pub fn scaling_curve(k_list: &[usize]) -> Result<Vec<ScalingPoint>> {
    k_list.iter().map(|&k| scaling_point(k)).collect()
}
