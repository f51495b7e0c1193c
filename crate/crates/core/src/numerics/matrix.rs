//! Dense complex matrices and the linear-algebra kernels built on them.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries; rejects wrong lengths and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Builds a matrix by stacking rows of equal length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("rows of unequal length".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols != x.len() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// Row vector times matrix: returns `wᵀ·self`.
    pub fn left_mul_vec(&self, w: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.rows != w.len() {
            return Err(Error::Dimension(format!(
                "cannot left-multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                w.len()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (i, wi) in w.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += wi * self[(i, j)];
            }
        }
        Ok(out)
    }

    /// Scales row `i` by `s` in place.
    pub fn scale_row(&mut self, i: usize, s: Complex64) {
        for z in &mut self.data[i * self.cols..(i + 1) * self.cols] {
            *z *= s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        assert!(i < self.rows && j < self.cols, "matrix index out of range");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        assert!(i < self.rows && j < self.cols, "matrix index out of range");
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Unconjugated dot product `Σ aᵢ·bᵢ`.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest entry modulus of a vector.
pub fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Singular values in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank: singular values above `tol` times the largest one.
pub fn rank(m: &ComplexMatrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Ratio of largest to smallest singular value; infinite when singular.
pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Unit-norm vector `ω` with `ωᵀ·m = 0` for an `(r+1)×r` matrix of full column rank.
///
/// The first entry of non-negligible modulus is rotated to be real and positive.
pub fn left_null_vector(m: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let r = m.cols;
    if m.rows != r + 1 {
        return Err(Error::Dimension(format!("left null vector needs rows = cols + 1, got {}x{}", m.rows, m.cols)));
    }
    // Square (r+1)x(r+1) matrix whose null space is the left null space of m.
    let mut a = DMatrix::<Complex64>::zeros(r + 1, r + 1);
    for i in 0..r {
        for j in 0..=r {
            a[(i, j)] = m[(j, i)];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..=r).collect();
    order.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]));
    let top = sv[order[0]];
    let smallest = order[r];
    let col_rank = if top == 0.0 { 0 } else { order.iter().filter(|&&i| sv[i] > DEFAULT_RANK_TOL * top).count() };
    if col_rank < r {
        return Err(Error::RankDeficient { rank: col_rank, required: r });
    }
    // A x = 0 for x = conj of the row of Vᴴ belonging to the zero singular value.
    let mut omega: Vec<Complex64> = (0..=r).map(|j| v_t[(smallest, j)].conj()).collect();
    let norm = omega.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut omega {
        *z /= norm;
    }
    let biggest = max_abs(&omega);
    if let Some(lead) = omega.iter().find(|z| z.norm() > 1e-12 * biggest).copied() {
        let phase = lead.conj() / lead.norm();
        for z in &mut omega {
            *z *= phase;
        }
    }
    Ok(omega)
}

/// Solves `a·x = b` for square full-rank `a`.
pub fn solve_linear(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.rows != a.cols {
        return Err(Error::Dimension(format!("solve needs a square matrix, got {}x{}", a.rows, a.cols)));
    }
    if b.len() != a.rows {
        return Err(Error::Dimension(format!("right-hand side has length {}, expected {}", b.len(), a.rows)));
    }
    let n = a.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let r = rank(a, DEFAULT_RANK_TOL);
    if r < n {
        return Err(Error::Singular { dim: n, rank: r });
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = a.to_nalgebra().lu().solve(&rhs).ok_or(Error::Singular { dim: n, rank: r })?;
    Ok(x.iter().copied().collect())
}

/// Minimum-norm least-squares solution of `a·x ≈ b`, discarding singular values below `tol·σ_max`.
pub fn least_squares(a: &ComplexMatrix, b: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    if b.len() != a.rows {
        return Err(Error::Dimension(format!("right-hand side has length {}, expected {}", b.len(), a.rows)));
    }
    if a.rows == 0 || a.cols == 0 {
        return Ok(vec![Complex64::default(); a.cols]);
    }
    let svd = a.to_nalgebra().svd(true, true);
    let eps = tol * svd.singular_values.max();
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = svd.solve(&rhs, eps).map_err(|e| Error::Inconsistent(format!("least squares: {e}")))?;
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> ComplexMatrix {
        let mut rng = RandomStream::new(seed, stream).rng();
        ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal())
    }

    #[test]
    fn least_squares_matches_solve_and_handles_deficiency() {
        let a = random_matrix(4, 4, 3, 0);
        let b = RandomStream::new(3, 1).rng().complex_vec(4);
        let x1 = solve_linear(&a, &b).unwrap();
        let x2 = least_squares(&a, &b, DEFAULT_RANK_TOL).unwrap();
        assert!(x1.iter().zip(&x2).all(|(p, q)| (p - q).norm() < 1e-9));

        // x = (1, -1) and (0, 0) give the same observations; the minimum-norm answer is zero.
        let d = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 2.0, 2.0]).unwrap();
        let x = least_squares(&d, &[c(0.0), c(0.0)], DEFAULT_RANK_TOL).unwrap();
        assert!(x.iter().all(|v| v.norm() < 1e-12));
        let x = least_squares(&d, &[c(2.0), c(4.0)], DEFAULT_RANK_TOL).unwrap();
        assert!((x[0] - c(1.0)).norm() < 1e-9 && (x[1] - c(1.0)).norm() < 1e-9);
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(ComplexMatrix::new(2, 2, vec![c(1.0); 3]).is_err());
        assert!(ComplexMatrix::new(1, 1, vec![Complex64::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn null_vector_trivial_cases() {
        let m = ComplexMatrix::from_real(2, 1, &[1.0, 0.0]).unwrap();
        let w = left_null_vector(&m).unwrap();
        assert!((w[0]).norm() < 1e-14 && (w[1] - c(1.0)).norm() < 1e-14);

        let m = ComplexMatrix::from_real(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let w = left_null_vector(&m).unwrap();
        assert!(w[0].norm() < 1e-14 && w[1].norm() < 1e-14 && (w[2] - c(1.0)).norm() < 1e-14);
    }

    #[test]
    fn null_vector_of_psin_geometry() {
        let m = random_matrix(7, 6, 3, 0);
        let w = left_null_vector(&m).unwrap();
        assert!(max_abs(&m.left_mul_vec(&w).unwrap()) < 1e-10);
        assert!(w[0].im.abs() < 1e-15 && w[0].re > 0.0);
    }

    #[test]
    fn null_vector_rank_deficient() {
        let m = ComplexMatrix::from_real(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        assert!(matches!(left_null_vector(&m), Err(Error::RankDeficient { rank: 1, required: 2 })));
        let m = ComplexMatrix::zeros(3, 3);
        assert!(left_null_vector(&m).is_err());
    }

    #[test]
    fn rank_basic() {
        assert_eq!(rank(&ComplexMatrix::zeros(3, 3), DEFAULT_RANK_TOL), 0);
        assert_eq!(rank(&ComplexMatrix::identity(6), DEFAULT_RANK_TOL), 6);
        assert_eq!(rank(&ComplexMatrix::zeros(0, 0), DEFAULT_RANK_TOL), 0);
    }

    #[test]
    fn solve_trivial_cases() {
        let b = vec![c(1.0), Complex64::new(0.0, 2.0)];
        assert_eq!(solve_linear(&ComplexMatrix::identity(2), &b).unwrap(), b);
        let d = ComplexMatrix::from_real(2, 2, &[2.0, 0.0, 0.0, 4.0]).unwrap();
        let x = solve_linear(&d, &[c(2.0), c(4.0)]).unwrap();
        assert!((x[0] - c(1.0)).norm() < 1e-15 && (x[1] - c(1.0)).norm() < 1e-15);
        let s = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(solve_linear(&s, &[c(1.0), c(1.0)]), Err(Error::Singular { .. })));
    }

    #[test]
    fn condition_number_of_identity_and_singular() {
        assert!((condition_number(&ComplexMatrix::identity(4)) - 1.0).abs() < 1e-12);
        assert!(condition_number(&ComplexMatrix::zeros(2, 2)).is_infinite());
    }

    #[test]
    fn null_vector_residuals_over_many_draws() {
        for trial in 0..1000u64 {
            let r = 1 + (trial % 8) as usize;
            let m = random_matrix(r + 1, r, 11, trial);
            let w = left_null_vector(&m).unwrap();
            assert!(max_abs(&m.left_mul_vec(&w).unwrap()) < 1e-9);
            let norm: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn rank_invariant_under_permutation_and_unitary(seed in 0u64..500, rows in 2usize..7, cols in 2usize..7, deficit in 0usize..2) {
            let inner = rows.min(cols).saturating_sub(deficit).max(1);
            let a = random_matrix(rows, inner, seed, 1);
            let b = random_matrix(inner, cols, seed, 2);
            let m = a.mul(&b).unwrap();
            let r = rank(&m, DEFAULT_RANK_TOL);
            prop_assert_eq!(r, inner);
            let permuted = ComplexMatrix::from_fn(rows, cols, |i, j| m[((i + 1) % rows, (j + 2) % cols)]);
            prop_assert_eq!(rank(&permuted, DEFAULT_RANK_TOL), r);
            let q = random_matrix(rows, rows, seed, 3).to_nalgebra().qr().q();
            let rotated = ComplexMatrix::from_nalgebra(&q).mul(&m).unwrap();
            prop_assert_eq!(rank(&rotated, DEFAULT_RANK_TOL), r);
        }

        #[test]
        fn solve_round_trip(seed in 0u64..1000, n in 1usize..9) {
            let a = random_matrix(n, n, seed, 4);
            let x: Vec<Complex64> = random_matrix(n, 1, seed, 5).entries().to_vec();
            let b = a.mul_vec(&x).unwrap();
            let got = solve_linear(&a, &b).unwrap();
            let resid = max_abs(&a.mul_vec(&got).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>());
            prop_assert!(resid <= 1e-8 * (1.0 + max_abs(&b)));
        }
    }
}
