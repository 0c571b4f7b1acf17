//! Dense real linear algebra for small dimensions.
//!
//! Everything here is sized for `d` up to a few dozen: matrices are stored
//! row-major in a flat `Vec`, vectors are plain slices. The kernel covers what
//! the rest of the crate needs and nothing more: products, a cyclic Jacobi
//! symmetric eigensolver, the Moore–Penrose pseudoinverse, Cholesky and LU
//! factorizations, and the Kronecker-sum Lyapunov solve.

mod eigen;
mod factor;
mod lyapunov;

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use eigen::{pseudo_inverse, sym_eigen, SymEigen, DEFAULT_PINV_REL_TOL};
pub use factor::{cholesky, cholesky_solve, lu_solve, Cholesky};
pub use lyapunov::kron_lyap_solve;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from `f64` rows. Panics on ragged input; intended for literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix literal");
            data.extend(row.iter().map(|&v| T::of(v)));
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
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

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// `d x 1` matrix holding one vector.
    pub fn column_vector(v: &[T]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let other_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self^T v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "tr_mul_vec shape mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            axpy(vi, self.row(i), &mut out);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "elementwise shape mismatch"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        axpy(s, &other.data, &mut self.data);
    }

    /// `self += s * u v^T`
    pub fn add_outer(&mut self, s: T, u: &[T], v: &[T]) {
        assert_eq!((self.rows, self.cols), (u.len(), v.len()));
        for (i, &ui) in u.iter().enumerate() {
            let f = s * ui;
            if f != T::zero() {
                axpy(f, v, &mut self.data[i * self.cols..(i + 1) * self.cols]);
            }
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Spectral norm via the largest eigenvalue of `M^T M`.
    pub fn spectral_norm(&self) -> T {
        let gram = SymMatrix::from_matrix_symmetrized(&self.transpose().matmul(self));
        sym_eigen(&gram)
            .map(|e| e.max_value().max(T::zero()).sqrt())
            .unwrap_or_else(|_| T::nan())
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest asymmetry `|m_ij - m_ji|`. Non-square matrices report infinity.
    pub fn asymmetry(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Square symmetric matrix. Construction enforces symmetry, so downstream
/// code can rely on exact `m_ij == m_ji`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix<T>(Matrix<T>);

impl<T: Real> SymMatrix<T> {
    /// Validates symmetry (relative tolerance 1e-12) and finiteness, then
    /// stores the exactly symmetrized matrix.
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidMatrix(format!(
                "{}x{} matrix is not square",
                m.rows, m.cols
            )));
        }
        if !m.is_finite() {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let tol = T::tol(1e-12, 16.0) * (T::one() + m.max_abs());
        let asym = m.asymmetry();
        if asym > tol {
            return Err(Error::InvalidMatrix(format!(
                "asymmetry {:e} exceeds tolerance",
                asym.as_f64()
            )));
        }
        Ok(Self::from_matrix_symmetrized(&m))
    }

    /// `(M + M^T) / 2` without any tolerance check.
    pub fn from_matrix_symmetrized(m: &Matrix<T>) -> Self {
        assert!(m.is_square(), "symmetrizing a non-square matrix");
        let half = T::of(0.5);
        Self(Matrix::from_fn(m.rows, m.cols, |i, j| {
            half * (m[(i, j)] + m[(j, i)])
        }))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    pub fn diag(values: &[T]) -> Self {
        Self(Matrix::diag(values))
    }

    /// `s * v v^T`
    pub fn outer(v: &[T], s: T) -> Self {
        let mut m = Matrix::zeros(v.len(), v.len());
        m.add_outer(s, v, v);
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        self.0.mul_vec(v)
    }

    pub fn quad_form(&self, v: &[T]) -> T {
        dot(v, &self.0.mul_vec(v))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.add(&other.0))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.sub(&other.0))
    }

    pub fn scale(&self, s: T) -> Self {
        Self(self.0.scale(s))
    }

    /// `self + s I`
    pub fn shifted(&self, s: T) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.rows {
            m[(i, i)] += s;
        }
        Self(m)
    }

    pub fn scale_in_place(&mut self, s: T) {
        self.0.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`, preserving symmetry.
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        self.0.add_scaled(s, &other.0);
    }

    /// `self += s * v v^T`
    pub fn add_outer(&mut self, s: T, v: &[T]) {
        self.0.add_outer(s, v, v);
    }

    /// `A^T self A`, symmetrized.
    pub fn congruence(&self, a: &Matrix<T>) -> Self {
        Self::from_matrix_symmetrized(&a.transpose().matmul(&self.0).matmul(a))
    }

    pub fn max_abs(&self) -> T {
        self.0.max_abs()
    }

    pub fn trace(&self) -> T {
        self.0.trace()
    }

    pub fn eigen(&self) -> Result<SymEigen<T>> {
        sym_eigen(self)
    }

    pub fn lambda_min(&self) -> Result<T> {
        Ok(self.eigen()?.min_value())
    }

    pub fn lambda_max(&self) -> Result<T> {
        Ok(self.eigen()?.max_value())
    }

    /// Spectral norm (largest |eigenvalue|).
    pub fn norm(&self) -> T {
        self.eigen()
            .map(|e| e.values().iter().fold(T::zero(), |m, v| m.max(v.abs())))
            .unwrap_or_else(|_| T::nan())
    }

    /// Inverse via the eigendecomposition. Errors if any eigenvalue is not
    /// strictly positive.
    pub fn inverse_pd(&self) -> Result<Self> {
        let e = self.eigen()?;
        if e.min_value() <= T::zero() {
            return Err(Error::NotPositiveDefinite { pivot: self.dim() });
        }
        Ok(e.map_values(|l| l.recip()))
    }

    pub fn cast<U: Real>(&self) -> SymMatrix<U> {
        SymMatrix(self.0.cast())
    }
}

impl<T> Index<(usize, usize)> for SymMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, idx: (usize, usize)) -> &T {
        &self.0[idx]
    }
}

impl<T> AsRef<Matrix<T>> for SymMatrix<T> {
    fn as_ref(&self) -> &Matrix<T> {
        &self.0
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += a * x`
#[inline]
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm2<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

pub fn sub_vec<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn max_abs_vec<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
