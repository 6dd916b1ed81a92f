//! Dense complex matrices and the small Hermitian solves needed by RZF.
//!
//! Storage is row-major, which is also the `vec` convention used throughout
//! the crate: element `(i, j)` of an `M x N` matrix sits at index `i * N + j`.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use crate::math::Float;
use crate::{Complex64, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} elements cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::ShapeMismatch("columns of unequal length".into()));
        }
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(Complex64::conj).collect(),
        }
    }

    /// Elementwise `self += scale * other`.
    pub fn add_scaled(&mut self, scale: Complex64, other: &CMatrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Row-major vectorization: element `(i, j)` of an `M x N` matrix maps to
/// index `i * N + j`. Note this is the transpose of the column-major `vec`
/// common in linear-algebra texts.
pub fn vectorize(m: &CMatrix) -> Vec<Complex64> {
    m.data.clone()
}

/// Inverse of [`vectorize`].
pub fn reshape(v: &[Complex64], rows: usize, cols: usize) -> Result<CMatrix> {
    CMatrix::from_row_major(rows, cols, v.to_vec())
}

/// Bilinear product `a^T b` (no conjugation).
pub fn dot_t(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Hermitian inner product `a^H b`.
pub fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(&x, &y)| x.conj() * y).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

/// Cholesky factor `L` of a Hermitian positive-definite matrix, `A = L L^H`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::ShapeMismatch(
                "Cholesky needs a square matrix".into(),
            ));
        }
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NonFinite("Cholesky pivot"));
            }
            let d = d.sqrt();
            l[(j, j)] = Complex64::new(d, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.l.rows();
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        y
    }
}
