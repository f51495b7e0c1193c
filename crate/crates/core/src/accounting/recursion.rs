//! Symbol-count recursion and per-phase, per-hop slot durations.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integer, ratio, Rational};

/// Scheme parameters: K users and L scheduled transmitters per PSIN batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemeParams {
    k: usize,
    l: usize,
}

impl SchemeParams {
    pub fn new(k: usize, l: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::Domain(format!("K must be at least 3, got {k}")));
        }
        if l < 3 || l > k {
            return Err(Error::Domain(format!("L must satisfy 3 <= L <= K = {k}, got {l}")));
        }
        Ok(Self { k, l })
    }

    /// Parameters from `q = L − 1`.
    pub fn from_q(q: usize, k: usize) -> Result<Self> {
        if q < 2 || q + 1 > k {
            return Err(Error::Domain(format!("q must satisfy 2 <= q <= K-1 = {}, got {q}", k.saturating_sub(1))));
        }
        Self::new(k, q + 1)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn q(&self) -> usize {
        self.l - 1
    }

    /// `1/q`.
    pub fn alpha(&self) -> Rational {
        ratio(1, self.q() as i64)
    }

    /// Symbols per PSIN batch: `K·L·(L−1)`.
    pub fn batch_symbols(&self) -> usize {
        self.k * self.l * (self.l - 1)
    }

    /// Slots per PSIN batch: `K(L−1)+1`.
    pub fn batch_slots(&self) -> usize {
        self.k * (self.l - 1) + 1
    }

    /// Repetition factor of the hop-K slot in phase `m`: `K(L−1)/((K−m)(L−1)+1)`.
    pub fn repetition(&self, m: usize) -> Rational {
        let q = self.q() as i64;
        let k = self.k as i64;
        ratio(k * q, (k - m as i64) * q + 1)
    }
}

/// Ratio `N_{j+1}/N_j` of consecutive symbol counts.
pub fn lambda_klj(k: usize, l: usize, j: usize) -> Result<Rational> {
    let p = SchemeParams::new(k, l)?;
    if j < 1 || j + 1 > k {
        return Err(Error::Domain(format!("j must satisfy 1 <= j <= K-1 = {}, got {j}", k - 1)));
    }
    Ok(lambda_unchecked(&p, j))
}

fn lambda_unchecked(p: &SchemeParams, j: usize) -> Rational {
    let (k, q, j) = (p.k as i64, p.q() as i64, j as i64);
    ratio((k - j) * (q * (j + 1) - 1), (j + 1) * (q * (k - j) + 1))
}

/// `N_1..N_K` by the step recursion `N_{m+1} = N_m·Λ(m)`.
pub fn n_sequence(p: &SchemeParams, n1: &Rational) -> Vec<Rational> {
    let mut out = Vec::with_capacity(p.k);
    out.push(n1.clone());
    for m in 1..p.k {
        let next = &out[m - 1] * lambda_unchecked(p, m);
        out.push(next);
    }
    out
}

/// `N_1..N_K` from the closed product form, reducing only once per entry.
pub fn n_sequence_product(p: &SchemeParams, n1: &Rational) -> Vec<Rational> {
    let (k, q) = (p.k as i64, p.q() as i64);
    (1..=p.k as i64)
        .map(|m| {
            let mut num = BigInt::one();
            let mut den = BigInt::one();
            for j in 1..m {
                num *= (k - j) * (q * (j + 1) - 1);
                den *= (j + 1) * (q * (k - j) + 1);
            }
            n1 * Rational::new(num, den)
        })
        .collect()
}

/// Symbol counts and slot durations of one scheme instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationProfile {
    pub params: SchemeParams,
    /// `N_1..N_K`.
    pub n: Vec<Rational>,
    /// `phase_hop[m-1][k-1]`: slots hop k spends in phase m.
    pub phase_hop: Vec<Vec<Rational>>,
    /// Column sums: total slots per hop.
    pub totals: Vec<Rational>,
}

impl DurationProfile {
    /// Slots of hop `k` in phase `m` (both one-based).
    pub fn t(&self, m: usize, k: usize) -> &Rational {
        &self.phase_hop[m - 1][k - 1]
    }

    /// Largest hop total and its one-based hop index (first on ties).
    pub fn max_hop(&self) -> (usize, &Rational) {
        let mut best = 0;
        for (i, t) in self.totals.iter().enumerate() {
            if t > &self.totals[best] {
                best = i;
            }
        }
        (best + 1, &self.totals[best])
    }

    /// Sum of all hop totals.
    pub fn spread(&self) -> Rational {
        self.totals.iter().fold(Rational::zero(), |a, b| a + b)
    }

    pub fn is_integral(&self) -> bool {
        self.n.iter().chain(self.phase_hop.iter().flatten()).all(Rational::is_integer)
    }
}

/// Phase-by-hop slot durations for `N_1 = n1`.
pub fn durations(p: &SchemeParams, n1: &Rational) -> DurationProfile {
    let k = p.k;
    let q = p.q() as i64;
    let ki = k as i64;
    let n = n_sequence(p, n1);
    let mut phase_hop = vec![vec![Rational::zero(); k]; k];
    for m in 1..=k {
        let nm = &n[m - 1];
        let row = &mut phase_hop[m - 1];
        if m == k {
            row[k - 1] = nm.clone();
            row[k - 2] = nm / integer(ki);
            continue;
        }
        if m >= 2 {
            row[m - 2] = nm / integer(ki);
        }
        row[m - 1] = nm * ratio(ki * q + 1, ki * (q + 1) * q);
        for hop in m + 1..k {
            row[hop - 1] = nm / integer(ki * q);
        }
        row[k - 1] = nm / integer((ki - m as i64) * q + 1);
    }
    let totals = (0..k).map(|hop| phase_hop.iter().fold(Rational::zero(), |acc, row| acc + &row[hop])).collect();
    DurationProfile { params: *p, n, phase_hop, totals }
}

fn lcm_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

/// Smallest N_1 giving whole batches, whole repetition groups and integer slot counts everywhere.
pub fn minimal_n1(p: &SchemeParams) -> BigInt {
    let one = integer(1);
    let profile = durations(p, &one);
    let k = p.k as i64;
    let q = p.q() as i64;
    let mut granules: Vec<Rational> = Vec::new();
    for m in 1..p.k {
        let nm = &profile.n[m - 1];
        granules.push(nm / integer(p.batch_symbols() as i64));
        let rep_den = p.repetition(m).denom().clone();
        granules.push(nm / Rational::from_integer(BigInt::from(k * q) * rep_den));
    }
    for m in 2..=p.k {
        granules.push(&profile.n[m - 1] / integer(k));
    }
    let all = profile.n.iter().chain(profile.phase_hop.iter().flatten()).chain(granules.iter());
    lcm_denominators(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(k: usize, l: usize) -> SchemeParams {
        SchemeParams::new(k, l).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SchemeParams::new(2, 3).is_err());
        assert!(SchemeParams::new(3, 2).is_err());
        assert!(SchemeParams::new(3, 5).is_err());
        assert_eq!(SchemeParams::from_q(2, 3).unwrap(), p(3, 3));
        assert!(SchemeParams::from_q(3, 3).is_err());
        assert_eq!(p(5, 4).alpha(), ratio(1, 3));
        assert_eq!(p(3, 3).repetition(1), ratio(6, 5));
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_klj(3, 3, 1).unwrap(), ratio(3, 5));
        assert_eq!(lambda_klj(3, 3, 2).unwrap(), ratio(5, 9));
        assert!(lambda_klj(3, 3, 0).is_err());
        assert!(lambda_klj(3, 3, 3).is_err());
    }

    #[test]
    fn lambda_strictly_inside_unit_interval() {
        for k in 3..=50 {
            for l in 3..=k {
                for j in 1..k {
                    let v = lambda_klj(k, l, j).unwrap();
                    assert!(v > integer(0) && v < integer(1), "K={k} L={l} j={j}");
                }
            }
        }
    }

    #[test]
    fn three_user_sequence_and_durations() {
        let prof = durations(&p(3, 3), &integer(1));
        assert_eq!(prof.n, vec![integer(1), ratio(3, 5), ratio(1, 3)]);
        assert_eq!(prof.totals, vec![ratio(53, 90), ratio(23, 45), ratio(11, 15)]);
        assert_eq!(prof.t(1, 3), &ratio(1, 5));
        assert_eq!(prof.t(2, 2), &ratio(7, 30));
        assert_eq!(prof.t(3, 2), &ratio(1, 9));
        assert_eq!(prof.t(2, 1), &ratio(1, 5));
        assert_eq!(prof.max_hop().0, 3);
    }

    #[test]
    fn silent_hops_are_zero() {
        let prof = durations(&p(7, 4), &integer(1));
        for m in 1..=7 {
            for k in 1..=7 {
                if k + 2 <= m {
                    assert_eq!(prof.t(m, k), &integer(0));
                } else {
                    assert!(prof.t(m, k) > &integer(0));
                }
            }
        }
    }

    #[test]
    fn product_form_matches_recursion() {
        let prof = p(5, 3);
        assert_eq!(n_sequence(&prof, &integer(1)), n_sequence_product(&prof, &integer(1)));
    }

    #[test]
    fn minimal_n1_three_user() {
        let params = p(3, 3);
        let n1 = minimal_n1(&params);
        assert_eq!(n1, BigInt::from(90));
        let prof = durations(&params, &Rational::from_integer(n1));
        assert!(prof.is_integral());
        assert_eq!(prof.totals, vec![integer(53), integer(46), integer(66)]);
    }

    proptest! {
        #[test]
        fn sequences_agree_and_decrease(k in 3usize..30, l_off in 0usize..28) {
            let l = 3 + l_off % (k - 2);
            let params = p(k, l);
            let a = n_sequence(&params, &integer(1));
            prop_assert_eq!(&a, &n_sequence_product(&params, &integer(1)));
            for w in a.windows(2) {
                prop_assert!(w[1] < w[0]);
            }
        }

        #[test]
        fn minimal_n1_gives_integers(k in 3usize..9, l_off in 0usize..7) {
            let l = 3 + l_off % (k - 2);
            let params = p(k, l);
            let n1 = Rational::from_integer(minimal_n1(&params));
            prop_assert!(durations(&params, &n1).is_integral());
            let batches = &n1 / integer(params.batch_symbols() as i64);
            prop_assert!(batches.is_integer());
        }

        #[test]
        fn totals_are_column_sums(k in 3usize..20, l_off in 0usize..18) {
            let l = 3 + l_off % (k - 2);
            let prof = durations(&p(k, l), &integer(1));
            let spread = prof.spread();
            prop_assert!(&spread >= prof.max_hop().1);
            for hop in 1..=k {
                let s = (1..=k).fold(integer(0), |a, m| a + prof.t(m, hop));
                prop_assert_eq!(&s, &prof.totals[hop - 1]);
            }
        }
    }
}
