use super::{Matrix, SymMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative eigenvalue cutoff used by [`pseudo_inverse`] when callers have no
/// better choice.
pub const DEFAULT_PINV_REL_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition `M = V diag(λ) V^T`, eigenvalues nonincreasing,
/// eigenvectors stored as the columns of `V`.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    values: Vec<T>,
    vectors: Matrix<T>,
}

impl<T: Real> SymEigen<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn vectors(&self) -> &Matrix<T> {
        &self.vectors
    }

    pub fn max_value(&self) -> T {
        self.values[0]
    }

    pub fn min_value(&self) -> T {
        *self.values.last().expect("nonempty spectrum")
    }

    /// `V f(Λ) V^T`
    pub fn map_values(&self, f: impl Fn(T) -> T) -> SymMatrix<T> {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for (k, &l) in self.values.iter().enumerate() {
            let fl = f(l);
            if fl == T::zero() {
                continue;
            }
            let v = self.vectors.column(k);
            out.add_outer(fl, &v, &v);
        }
        SymMatrix::from_matrix_symmetrized(&out)
    }

    pub fn reconstruct(&self) -> SymMatrix<T> {
        self.map_values(|l| l)
    }
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps until the off-diagonal Frobenius norm drops to `1e-13 ‖M‖_F`
/// (or a few ulps for `f32`), capped at 100 sweeps.
pub fn sym_eigen<T: Real>(m: &SymMatrix<T>) -> Result<SymEigen<T>> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    if !m.as_matrix().is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let threshold = T::tol(1e-13, 4.0) * a.frobenius();

    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= threshold || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).expect("finite diagonal"));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

fn off_diagonal_norm<T: Real>(a: &Matrix<T>) -> T {
    let n = a.rows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Applies the Jacobi rotation that zeroes `a[p][q]`, accumulating into `v`.
fn rotate<T: Real>(a: &mut Matrix<T>, v: &mut Matrix<T>, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let theta = (a[(q, q)] - a[(p, p)]) / (T::of(2.0) * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
    let c = (t * t + T::one()).sqrt().recip();
    let s = t * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = T::zero();
    a[(q, p)] = T::zero();

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Moore–Penrose pseudoinverse of a symmetric matrix. Eigenvalues with
/// `|λ| ≤ rel_tol · max|λ|` are treated as zero; the zero matrix maps to itself.
pub fn pseudo_inverse<T: Real>(m: &SymMatrix<T>, rel_tol: T) -> Result<SymMatrix<T>> {
    let e = sym_eigen(m)?;
    let scale = e.values().iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return Ok(SymMatrix::zeros(m.dim()));
    }
    let cutoff = rel_tol * scale;
    Ok(e.map_values(|l| {
        if l.abs() <= cutoff {
            T::zero()
        } else {
            l.recip()
        }
    }))
}
