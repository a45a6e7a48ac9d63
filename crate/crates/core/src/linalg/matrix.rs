use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense square matrix, row-major. Used for eigenvector bases, rotations and
/// intermediate (non-symmetric) products such as `pi_i * xi * pi_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Input("matrix must have at least one row".into()));
        }
        if let Some(bad) = rows.iter().position(|row| row.len() != n) {
            return Err(Error::Input(format!(
                "row {} has {} entries, expected {n}",
                bad + 1,
                rows[bad].len()
            )));
        }
        Ok(Matrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "dimension mismatch in matmul");
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Largest entrywise deviation from skew-symmetry, `max |a_ij + a_ji|`.
    pub fn skew_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self[(i, j)] + self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `max |(Q^T Q - I)_ij|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let qtq = self.transpose().matmul(self);
        qtq.sub(&Matrix::identity(self.n)).max_abs()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
                .unwrap_or(col);
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for row in (col + 1)..n {
                let factor = a[row * n + col] / p;
                for k in col..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
        det
    }

    /// `(A + A^T) / 2` as a symmetric matrix.
    pub fn symmetric_part(&self) -> SymMatrix {
        SymMatrix::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Dense real symmetric matrix. Entries are stored in full, row-major, and
/// kept exactly symmetric: every constructor symmetrizes.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    inner: Matrix,
}

/// Wire format shared by matrices and directions: `{"dim": d, "rows": [[..], ..]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl SymMatrix {
    pub fn zeros(d: usize) -> Self {
        SymMatrix {
            inner: Matrix::zeros(d),
        }
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix {
            inner: Matrix::identity(d),
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        SymMatrix { inner: m }
    }

    /// Builds from `f(i, j)` for `i <= j`, mirroring the upper triangle.
    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix { inner: m }
    }

    /// Accepts rows whose asymmetry is within `1e-12 * (1 + max|X|)`, then
    /// stores the symmetrized matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        if m.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("matrix has non-finite entries".into()));
        }
        let tol = 1e-12 * (1.0 + m.max_abs());
        let n = m.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if gap > tol {
                    return Err(Error::Input(format!(
                        "matrix is not symmetric: |X[{}][{}] - X[{}][{}]| = {gap:e}",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(m.symmetric_part())
    }

    pub fn from_json(json: &MatrixJson) -> Result<Self> {
        if json.dim == 0 {
            return Err(Error::Input("dim must be at least 1".into()));
        }
        if json.rows.len() != json.dim {
            return Err(Error::Input(format!(
                "dim is {} but {} rows were given",
                json.dim,
                json.rows.len()
            )));
        }
        SymMatrix::from_rows(&json.rows)
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson {
            dim: self.dim(),
            rows: self.rows(),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.inner
            .as_slice()
            .chunks(self.dim())
            .map(|row| row.to_vec())
            .collect()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    /// Frobenius inner product `Trace(A B)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.inner
            .as_slice()
            .iter()
            .zip(other.inner.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            inner: self.inner.add(&other.inner),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            inner: self.inner.sub(&other.inner),
        }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            inner: self.inner.scale(s),
        }
    }

    /// `self + t * dir`.
    pub fn axpy(&self, t: f64, dir: &SymMatrix) -> SymMatrix {
        SymMatrix::from_fn(self.dim(), |i, j| self.get(i, j) + t * dir.get(i, j))
    }

    pub fn matmul(&self, other: &SymMatrix) -> Matrix {
        self.inner.matmul(&other.inner)
    }

    /// `X^k` (not symmetrized; exact powers of a symmetric matrix are symmetric
    /// up to roundoff).
    pub fn pow(&self, k: u32) -> Matrix {
        let mut acc = Matrix::identity(self.dim());
        for _ in 0..k {
            acc = acc.matmul(&self.inner);
        }
        acc
    }

    /// Rank-one projection `u u^T`.
    pub fn outer(u: &[f64]) -> SymMatrix {
        SymMatrix::from_fn(u.len(), |i, j| u[i] * u[j])
    }
}

impl fmt::Display for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.6}")).collect();
            writeln!(f, "[{}]", cells.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_rejects_asymmetry() {
        let err = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn from_rows_symmetrizes_within_tolerance() {
        let x = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0 + 1e-13, 1.0]]).unwrap();
        assert_eq!(x.get(0, 1), x.get(1, 0));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0]]).is_err());
        assert!(SymMatrix::from_rows(&[]).is_err());
    }

    #[test]
    fn json_dim_must_match() {
        let json = MatrixJson {
            dim: 3,
            rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert!(SymMatrix::from_json(&json).is_err());
    }

    #[test]
    fn inner_is_frobenius() {
        let a = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(a.inner(&a), 10.0);
        assert_eq!(a.frobenius_norm(), 10f64.sqrt());
    }
}
