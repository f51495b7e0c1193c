//! Three-user two-hop interference network: hop durations with relay cooperation and order-2 efficiency.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fraction_string, ratio, Rational};

/// Hop-1 and hop-2 durations as `base + per_beta·β`, normalized by N₁.
fn hop_lines() -> [(Rational, Rational); 2] {
    // Hop 1: 7/18 + 4β/9 + (1−β)/4.   Hop 2: 1/4 + 5β/12 + 4(1−β)/9.
    let h1 = (ratio(7, 18) + ratio(1, 4), ratio(4, 9) - ratio(1, 4));
    let h2 = (ratio(1, 4) + ratio(4, 9), ratio(5, 12) - ratio(4, 9));
    [h1, h2]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoHopResult {
    pub beta: Rational,
    pub t1: Rational,
    pub t2: Rational,
    pub dof: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoHopRecord {
    pub beta: String,
    pub t1: String,
    pub t2: String,
    pub dof: String,
}

impl TwoHopResult {
    pub fn record(&self) -> TwoHopRecord {
        TwoHopRecord {
            beta: fraction_string(&self.beta),
            t1: fraction_string(&self.t1),
            t2: fraction_string(&self.t2),
            dof: fraction_string(&self.dof),
        }
    }
}

/// Hop durations and DoF when a fraction `beta` of order-2 symbols uses relay cooperation.
pub fn two_hop_3user(beta: &Rational, n1: &Rational) -> Result<TwoHopResult> {
    if beta < &Rational::zero() || beta > &Rational::one() {
        return Err(Error::Domain(format!("beta must lie in [0, 1], got {}", fraction_string(beta))));
    }
    if n1 <= &Rational::zero() {
        return Err(Error::Domain("N1 must be positive".into()));
    }
    let [h1, h2] = hop_lines();
    let t1 = n1 * (&h1.0 + &h1.1 * beta);
    let t2 = n1 * (&h2.0 + &h2.1 * beta);
    let dof = n1 / if t1 > t2 { &t1 } else { &t2 };
    Ok(TwoHopResult { beta: beta.clone(), t1, t2, dof })
}

/// The β that equalizes both hop durations.
pub fn beta_star() -> Rational {
    let [h1, h2] = hop_lines();
    (&h2.0 - &h1.0) / (&h1.1 - &h2.1)
}

/// Order-2 efficiency `N_I / (2·N₂)`.
pub fn eta2(n2: &Rational, n_i: &Rational) -> Result<Rational> {
    if n2 <= &Rational::zero() {
        return Err(Error::Domain("N2 must be positive".into()));
    }
    if n_i < &Rational::zero() || n_i > &(n2 * Rational::from_integer(2.into())) {
        return Err(Error::Domain("N_I must lie in [0, 2·N2]".into()));
    }
    Ok(n_i / (n2 * Rational::from_integer(2.into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integer;

    #[test]
    fn published_values() {
        let one = integer(1);
        assert_eq!(two_hop_3user(&integer(0), &one).unwrap().dof, ratio(36, 25));
        let b = beta_star();
        assert_eq!(b, ratio(1, 4));
        let r = two_hop_3user(&b, &integer(16)).unwrap();
        assert_eq!(r.t1, integer(11));
        assert_eq!(r.t2, integer(11));
        assert_eq!(r.dof, ratio(16, 11));
        assert!(two_hop_3user(&ratio(5, 4), &one).is_err());
    }

    #[test]
    fn beta_star_maximizes_on_grid() {
        let best = two_hop_3user(&beta_star(), &integer(1)).unwrap().dof;
        for i in 0..=400 {
            let d = two_hop_3user(&ratio(i, 400), &integer(1)).unwrap().dof;
            assert!(d <= best);
        }
    }

    #[test]
    fn efficiency_values() {
        let n1 = integer(90);
        let n2 = &n1 * ratio(3, 5);
        let n_i = &n1 * ratio(2, 5) + &n1 * ratio(1, 5) * integer(2);
        assert_eq!(eta2(&n2, &n_i).unwrap(), ratio(2, 3));
        assert_eq!(eta2(&integer(4), &integer(8)).unwrap(), integer(1));
        assert_eq!(eta2(&integer(4), &integer(0)).unwrap(), integer(0));
        assert!(eta2(&integer(0), &integer(0)).is_err());
        assert!(eta2(&integer(1), &integer(3)).is_err());
    }
}
