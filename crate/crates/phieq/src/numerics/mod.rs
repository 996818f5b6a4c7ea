//! Dense linear algebra kernels and a small linear-program solver.
//!
//! Every reduction runs left to right in a fixed order so identical inputs
//! produce bit-identical outputs.

mod lp;

pub use lp::{lp_solve, LpConstraint, LpOutcome, LpProblem, Relation, Sense};

use crate::error::{check_dim, Error, Result};

pub type DenseVector = Vec<f64>;

/// Row-major dense matrix of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in diag.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InvalidInput("matrix needs at least one row".into()));
        }
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dim(c, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
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
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        let n = self.rows.min(self.cols);
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.get(i, i);
        }
        acc
    }

    /// Replaces the matrix by `(M + M^T) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    /// Lower-triangular Cholesky factor, or `None` when the matrix is not
    /// numerically positive definite.
    pub fn cholesky(&self) -> Option<DenseMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l.set(j, j, djj);
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / djj);
            }
        }
        Some(l)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<DenseMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = DenseMatrix::identity(n);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return None;
        }
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a.get(r, col).abs() > a.get(piv, col).abs() {
                    piv = r;
                }
            }
            if a.get(piv, col).abs() <= 1e-14 * scale {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let p = a.get(col, col);
            for j in 0..n {
                a.data[col * n + j] /= p;
                inv.data[col * n + j] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a.data[r * n + j] -= f * a.data[col * n + j];
                    inv.data[r * n + j] -= f * inv.data[col * n + j];
                }
            }
        }
        Some(inv)
    }

    /// Solves `A x = b` for square invertible `A`.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let inv = self.inverse()?;
        matvec(&inv, b).ok()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn checked_dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(dot(a, b))
}

pub fn matvec(m: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    check_dim(m.cols, v.len())?;
    Ok((0..m.rows).map(|i| dot(m.row(i), v)).collect())
}

/// Computes `M^T v`.
pub fn matvec_t(m: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    check_dim(m.rows, v.len())?;
    let mut out = vec![0.0; m.cols];
    for i in 0..m.rows {
        let row = m.row(i);
        for j in 0..m.cols {
            out[j] += row[j] * v[i];
        }
    }
    Ok(out)
}

pub fn matmat(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_dim(a.cols, b.rows)?;
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut acc = 0.0;
            for k in 0..a.cols {
                acc += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

pub fn norm1(v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for x in v {
        acc += x.abs();
    }
    acc
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn frobenius(m: &DenseMatrix) -> f64 {
    norm2(&m.data)
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for i in 0..y.len() {
        y[i] += alpha * x[i];
    }
}

/// Bit pattern of a vector, used as an exact memoization key.
pub fn bits_key(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matvec_is_noop() {
        let v = vec![1.5, -2.0, 0.25];
        assert_eq!(matvec(&DenseMatrix::identity(3), &v).unwrap(), v);
    }

    #[test]
    fn norms_of_small_examples() {
        assert_eq!(norm1(&[1.0, -2.0, 3.0]), 6.0);
        assert_eq!(frobenius(&DenseMatrix::identity(2)), 2f64.sqrt());
        assert_eq!(norm2(&[3.0, 4.0]), 5.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = DenseMatrix::identity(2);
        assert_eq!(
            matvec(&m, &[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
        assert!(matmat(&m, &DenseMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn cholesky_and_inverse_round_trip() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = a.cholesky().unwrap();
        let back = matmat(&l, &l.transpose()).unwrap();
        assert!(sub(back.data(), a.data()).iter().all(|v| v.abs() < 1e-14));
        let inv = a.inverse().unwrap();
        let id = matmat(&a, &inv).unwrap();
        let err = frobenius(&DenseMatrix::new(2, 2, sub(id.data(), DenseMatrix::identity(2).data())).unwrap());
        assert!(err < 1e-14);
        assert!(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]])
            .unwrap()
            .inverse()
            .is_none());
        assert!(DenseMatrix::diagonal(&[1.0, -1.0]).cholesky().is_none());
    }
}
