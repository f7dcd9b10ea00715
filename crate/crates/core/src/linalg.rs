//! Small dense linear algebra: row-major matrices and a jittered Cholesky
//! factorization. Problem sizes here are bounded by the number of distinct
//! actions (a few hundred at most), so nothing fancier is needed.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Jitter schedule tried after a plain factorization fails.
pub const JITTER_SCHEDULE: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    left: cols,
                    right: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "matvec dimension");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn add_diagonal(&mut self, v: T) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] = self[(i, i)] + v;
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lower-triangular Cholesky factor `A + jitter·I = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
    pivots: Vec<T>,
    jitter: T,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric matrix, escalating diagonal jitter through
    /// [`JITTER_SCHEDULE`] when the plain factorization fails.
    pub fn factor(a: &Matrix<T>, stage: &'static str) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch {
                left: a.rows(),
                right: a.cols(),
            });
        }
        if let Some(c) = Self::try_factor(a, T::zero()) {
            return Ok(c);
        }
        for &j in &JITTER_SCHEDULE {
            if let Some(c) = Self::try_factor(a, T::lit(j)) {
                return Ok(c);
            }
        }
        Err(Error::NotPositiveDefinite { stage })
    }

    /// Plain factorization without jitter; `None` if not positive definite.
    pub fn strict(a: &Matrix<T>) -> Option<Self> {
        Self::try_factor(a, T::zero())
    }

    fn try_factor(a: &Matrix<T>, jitter: T) -> Option<Self> {
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        let mut pivots = Vec::with_capacity(n);
        for j in 0..n {
            let mut d = a[(j, j)] + jitter;
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            pivots.push(d);
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(Self { l, pivots, jitter })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn factor_matrix(&self) -> &Matrix<T> {
        &self.l
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "forward-substitution dimension");
        let mut z = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let s = dot(&row[..i], &z[..i]);
            z[i] = (z[i] - s) / row[i];
        }
        z
    }

    /// Solves `Lᵀ x = z`.
    pub fn backward(&self, z: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `(A + jitter·I) x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward(&self.forward(b))
    }

    /// `ln det(A + jitter·I)`, summed over the pivots `L_ii²` as computed
    /// before their square roots were taken.
    pub fn log_det(&self) -> T {
        self.pivots.iter().map(|d| d.ln()).sum()
    }

    /// Inverse of the factored matrix.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}
