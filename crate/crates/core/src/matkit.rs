//! Dense real-matrix kernel for the small systems handled here (2N ≤ 10).
//!
//! Row-major storage, partial-pivot LU, Kronecker-vectorized Lyapunov solve
//! and an unpivoted Cholesky positive-definiteness test. Tolerances are
//! relative to the ∞-norm of the operand so they stay unit-independent.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Pivot threshold used by [`lu_solve`] and [`inverse`], relative to ‖a‖∞.
pub const SOLVE_PIVOT_TOL: f64 = 1e-12;
/// Default relative threshold for [`rank_deficient`].
pub const RANK_TOL: f64 = 1e-10;
/// Absolute symmetry tolerance for [`is_positive_definite`].
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Smallest Cholesky pivot accepted as positive.
pub const CHOLESKY_PIVOT_MIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("matrix is singular (pivot {pivot:.3e} at column {column}, scale {scale:.3e})")]
    SingularMatrix { column: usize, pivot: f64, scale: f64 },
    #[error("matrix is not symmetric (|p[{row}][{col}] - p[{col}][{row}]| = {gap:.3e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Dense row-major real matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatError> {
        if data.len() != rows * cols {
            return Err(MatError::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatError::NonFinite { row: k / cols.max(1), col: k % cols.max(1) });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. Panics on ragged or non-finite input,
    /// which makes it suitable for literals in code and tests.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.as_ref().len(), c, "ragged rows");
            data.extend_from_slice(row.as_ref());
        }
        Self::new(r, c, data).expect("finite matrix literal")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn column(values: &[f64]) -> Self {
        Self::from_rows(&values.iter().map(|v| [*v]).collect::<Vec<_>>())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn get_block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Mat) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols, "block out of range");
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `out = self · x` without allocating.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "vector length");
        assert_eq!(out.len(), self.rows, "output length");
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Largest entrywise gap to `other`.
    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape");
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn symmetrize(&self) -> Self {
        assert!(self.is_square());
        let t = self.transpose();
        (self + &t).scale(0.5)
    }

    fn check_finite(self) -> Self {
        debug_assert!(self.data.iter().all(|v| v.is_finite()), "non-finite matrix result");
        self
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "inner dimensions");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out.check_finite()
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }.check_finite()
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }.check_finite()
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat{}x{} ", self.rows, self.cols)?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|v| format!("{v:>12.6}")).collect();
            writeln!(f, "[{}]", cells.join(" "))?;
        }
        Ok(())
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Mat::new(r, c, rows.into_iter().flatten().collect()).map_err(serde::de::Error::custom)
    }
}

/// Partial-pivot LU factorization `P·a = L·U`, stored compactly.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    /// Smallest |pivot| met during elimination.
    min_pivot: f64,
    min_pivot_col: usize,
    scale: f64,
}

impl Lu {
    /// Runs the full elimination; never fails. Zero pivots are recorded and
    /// their columns skipped so the pivot profile stays available for rank tests.
    pub fn factor(a: &Mat) -> Result<Self, MatError> {
        if !a.is_square() {
            return Err(MatError::Dimension(format!("LU needs a square matrix, got {}x{}", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        let mut min_pivot_col = 0;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot < min_pivot {
                min_pivot = pivot;
                min_pivot_col = k;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu[k * n + k];
            if d == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        if n == 0 {
            min_pivot = f64::INFINITY;
        }
        Ok(Self { n, lu, perm, min_pivot, min_pivot_col, scale: a.norm_inf() })
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// True when some pivot falls below `tol·‖a‖∞` (a zero matrix always does).
    pub fn is_deficient(&self, tol: f64) -> bool {
        self.n > 0 && (self.scale == 0.0 || self.min_pivot < tol * self.scale)
    }

    fn ensure_regular(&self) -> Result<(), MatError> {
        if self.is_deficient(SOLVE_PIVOT_TOL) {
            Err(MatError::SingularMatrix { column: self.min_pivot_col, pivot: self.min_pivot, scale: self.scale })
        } else {
            Ok(())
        }
    }

    pub fn solve(&self, rhs: &Mat) -> Result<Mat, MatError> {
        let n = self.n;
        if rhs.rows != n {
            return Err(MatError::Dimension(format!("rhs has {} rows, expected {n}", rhs.rows)));
        }
        self.ensure_regular()?;
        let k = rhs.cols;
        let mut x = Mat::zeros(n, k);
        for (i, &p) in self.perm.iter().enumerate() {
            for j in 0..k {
                x[(i, j)] = rhs[(p, j)];
            }
        }
        for j in 0..k {
            for i in 0..n {
                let mut s = x[(i, j)];
                for m in 0..i {
                    s -= self.lu[i * n + m] * x[(m, j)];
                }
                x[(i, j)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, j)];
                for m in i + 1..n {
                    s -= self.lu[i * n + m] * x[(m, j)];
                }
                x[(i, j)] = s / self.lu[i * n + i];
            }
        }
        Ok(x.check_finite())
    }
}

/// Solves `a·X = rhs` by partial-pivot LU.
pub fn lu_solve(a: &Mat, rhs: &Mat) -> Result<Mat, MatError> {
    Lu::factor(a)?.solve(rhs)
}

pub fn inverse(a: &Mat) -> Result<Mat, MatError> {
    lu_solve(a, &Mat::identity(a.rows))
}

/// True iff partial-pivot LU meets a pivot below `tol·‖a‖∞`.
pub fn rank_deficient(a: &Mat, tol: f64) -> bool {
    match Lu::factor(a) {
        Ok(lu) => lu.is_deficient(tol),
        Err(_) => true,
    }
}

/// Solves `fᵀP + P·f = −q` for symmetric `P`.
///
/// The equation is vectorized row-major into an n²×n² system and solved by LU;
/// a singular system means two eigenvalues of `f` sum to zero.
pub fn lyapunov_solve(f: &Mat, q: &Mat) -> Result<Mat, MatError> {
    if !f.is_square() || !q.is_square() || f.rows != q.rows {
        return Err(MatError::Dimension(format!(
            "lyapunov needs square f and q of equal size, got {}x{} and {}x{}",
            f.rows, f.cols, q.rows, q.cols
        )));
    }
    let n = f.rows;
    let nn = n * n;
    let mut big = Mat::zeros(nn, nn);
    let mut rhs = Mat::zeros(nn, 1);
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            rhs[(r, 0)] = -q[(i, j)];
            for k in 0..n {
                big[(r, k * n + j)] += f[(k, i)];
                big[(r, i * n + k)] += f[(k, j)];
            }
        }
    }
    let v = lu_solve(&big, &rhs)?;
    let p = Mat::new(n, n, v.data).expect("finite lyapunov solution");
    Ok(p.symmetrize())
}

/// ‖fᵀP + P·f + q‖∞.
pub fn lyapunov_residual(f: &Mat, p: &Mat, q: &Mat) -> f64 {
    let ft = f.transpose();
    (&(&(&ft * p) + &(p * f)) + q).norm_inf()
}

pub fn check_symmetric(p: &Mat, tol: f64) -> Result<(), MatError> {
    if !p.is_square() {
        return Err(MatError::Dimension(format!("expected a square matrix, got {}x{}", p.rows, p.cols)));
    }
    for i in 0..p.rows {
        for j in i + 1..p.cols {
            let gap = (p[(i, j)] - p[(j, i)]).abs();
            if gap > tol {
                return Err(MatError::NotSymmetric { row: i, col: j, gap });
            }
        }
    }
    Ok(())
}

/// Unpivoted Cholesky test: true iff every diagonal pivot exceeds 1e-12.
pub fn is_positive_definite(p: &Mat) -> Result<bool, MatError> {
    check_symmetric(p, SYMMETRY_TOL)?;
    let n = p.rows;
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= CHOLESKY_PIVOT_MIN {
            return Ok(false);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = p[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(true)
}

/// Hurwitz certificate: `fᵀP + P·f = −I` has a positive-definite solution.
pub fn is_hurwitz(f: &Mat) -> bool {
    match lyapunov_solve(f, &Mat::identity(f.rows)) {
        Ok(p) => is_positive_definite(&p).unwrap_or(false),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_area_a(eps: f64) -> Mat {
        let t = 3.132;
        let m = 6.0;
        Mat::from_rows(&[
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-(t + eps * t) / m, t / m, -1.2 / m, 0.0],
            [t / m, -(t + eps * t) / m, 0.0, -1.2 / m],
        ])
    }

    #[test]
    fn lu_solve_identity_returns_rhs() {
        let b = Mat::from_rows(&[[1.5, -2.0], [0.25, 3.0], [7.0, 0.0]]);
        assert_eq!(lu_solve(&Mat::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn lu_solve_diagonal() {
        let a = Mat::from_rows(&[[2.0, 0.0], [0.0, 4.0]]);
        let x = lu_solve(&a, &Mat::column(&[2.0, 8.0])).unwrap();
        assert_eq!(x, Mat::column(&[1.0, 2.0]));
    }

    #[test]
    fn lu_solve_rejects_unregularized_two_area() {
        let err = lu_solve(&two_area_a(0.0), &Mat::column(&[1.0, 0.0, 0.0, 0.0])).unwrap_err();
        assert!(matches!(err, MatError::SingularMatrix { .. }), "{err:?}");
    }

    #[test]
    fn lu_solve_residual_bound() {
        let a = Mat::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, -1.0], [0.0, 2.0, 5.0]]);
        let b = Mat::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]]);
        let x = lu_solve(&a, &b).unwrap();
        assert!((&(&a * &x) - &b).norm_inf() <= 1e-10 * b.norm_inf());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse(&Mat::identity(4)).unwrap(), Mat::identity(4));
        let d = inverse(&Mat::from_rows(&[[2.0, 0.0], [0.0, 0.5]])).unwrap();
        assert_eq!(d, Mat::from_rows(&[[0.5, 0.0], [0.0, 2.0]]));
        let u = inverse(&Mat::from_rows(&[[1.0, 1.0], [0.0, 1.0]])).unwrap();
        assert_eq!(u, Mat::from_rows(&[[1.0, -1.0], [0.0, 1.0]]));
    }

    #[test]
    fn rank_deficiency_examples() {
        assert!(rank_deficient(&two_area_a(0.0), RANK_TOL));
        assert!(!rank_deficient(&two_area_a(0.05), RANK_TOL));
        assert!(rank_deficient(&Mat::zeros(3, 3), RANK_TOL));
    }

    #[test]
    fn lyapunov_examples() {
        let p = lyapunov_solve(&Mat::from_rows(&[[-2.0]]), &Mat::from_rows(&[[4.0]])).unwrap();
        assert_abs_diff_eq!(p[(0, 0)], 1.0, epsilon = 1e-15);
        let p = lyapunov_solve(&Mat::identity(2).scale(-1.0), &Mat::identity(2)).unwrap();
        assert_eq!(p, Mat::identity(2).scale(0.5));
        let p = lyapunov_solve(&Mat::from_rows(&[[-1.0]]), &Mat::from_rows(&[[0.0]])).unwrap();
        assert_eq!(p[(0, 0)], 0.0);
    }

    #[test]
    fn lyapunov_resonant_spectrum_is_singular() {
        // eigenvalues ±1 sum to zero
        let f = Mat::from_rows(&[[1.0, 0.0], [0.0, -1.0]]);
        assert!(matches!(lyapunov_solve(&f, &Mat::identity(2)), Err(MatError::SingularMatrix { .. })));
    }

    #[test]
    fn lyapunov_nonsymmetric_f() {
        let f = Mat::from_rows(&[[-1.0, 2.0, 0.0], [-0.5, -3.0, 1.0], [0.0, 0.3, -2.0]]);
        let q = Mat::from_rows(&[[2.0, 0.5, 0.0], [0.5, 1.0, 0.1], [0.0, 0.1, 3.0]]);
        let p = lyapunov_solve(&f, &q).unwrap();
        assert_eq!(p, p.transpose());
        assert!(lyapunov_residual(&f, &p, &q) <= 1e-9 * q.norm_inf());
    }

    #[test]
    fn positive_definite_examples() {
        assert!(is_positive_definite(&Mat::identity(3)).unwrap());
        assert!(!is_positive_definite(&Mat::from_rows(&[[1.0, 0.0], [0.0, -1.0]])).unwrap());
        assert!(is_positive_definite(&Mat::from_rows(&[[2.0, 1.0], [1.0, 2.0]])).unwrap());
        let err = is_positive_definite(&Mat::from_rows(&[[1.0, 0.5], [0.0, 1.0]])).unwrap_err();
        assert!(matches!(err, MatError::NotSymmetric { .. }));
    }

    #[test]
    fn hurwitz_certificate() {
        assert!(is_hurwitz(&two_area_a(0.05)));
        assert!(!is_hurwitz(&two_area_a(0.0)));
        assert!(!is_hurwitz(&Mat::from_rows(&[[0.1]])));
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert!(matches!(Mat::new(1, 2, vec![1.0, f64::NAN]), Err(MatError::NonFinite { row: 0, col: 1 })));
        assert!(matches!(Mat::new(2, 2, vec![1.0]), Err(MatError::Dimension(_))));
    }

    #[test]
    fn serde_as_nested_rows() {
        let m = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.5]]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.5]]");
        assert_eq!(serde_json::from_str::<Mat>(&s).unwrap(), m);
        assert!(serde_json::from_str::<Mat>("[[1.0],[2.0,3.0]]").is_err());
    }

    /// Diagonally dominant random matrices keep the condition number small.
    fn well_conditioned(n: usize) -> impl Strategy<Value = Mat> {
        prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |mut v| {
            for i in 0..n {
                let off: f64 = (0..n).filter(|&j| j != i).map(|j| v[i * n + j].abs()).sum();
                let sign = if v[i * n + i] < 0.0 { -1.0 } else { 1.0 };
                v[i * n + i] = sign * (off + 0.5 + v[i * n + i].abs());
            }
            Mat::new(n, n, v).unwrap()
        })
    }

    fn stable_matrix(n: usize) -> impl Strategy<Value = Mat> {
        well_conditioned(n).prop_map(|m| {
            let n = m.rows();
            let mut m = m;
            for i in 0..n {
                m[(i, i)] = -m[(i, i)].abs();
            }
            m
        })
    }

    proptest! {
        #[test]
        fn inverse_residual(a in (1usize..=10).prop_flat_map(well_conditioned)) {
            let inv = inverse(&a).unwrap();
            let err = (&(&a * &inv) - &Mat::identity(a.rows())).norm_inf();
            prop_assert!(err <= 1e-9, "residual {err}");
        }

        #[test]
        fn regular_means_solvable(a in (1usize..=8).prop_flat_map(well_conditioned), seed in -5.0f64..5.0) {
            prop_assume!(!rank_deficient(&a, RANK_TOL));
            let b = Mat::new(a.rows(), 1, (0..a.rows()).map(|i| seed + i as f64).collect()).unwrap();
            prop_assert!(lu_solve(&a, &b).is_ok());
        }

        #[test]
        fn lyapunov_symmetric_with_small_residual(f in (1usize..=5).prop_flat_map(stable_matrix)) {
            let n = f.rows();
            let q = Mat::identity(n);
            let p = lyapunov_solve(&f, &q).unwrap();
            prop_assert_eq!(&p, &p.transpose());
            prop_assert!(lyapunov_residual(&f, &p, &q) <= 1e-9 * q.norm_inf());
            prop_assert!(is_positive_definite(&p).unwrap());
        }
    }
}
