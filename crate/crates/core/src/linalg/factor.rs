use super::{Matrix, SymMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower-triangular Cholesky factor `L` with `L L^T = M`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(m: &SymMatrix<T>) -> Result<Self> {
        let n = m.dim();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = m[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    pub fn into_lower(self) -> Matrix<T> {
        self.lower
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let l = &self.lower;
        let n = l.rows();
        assert_eq!(b.len(), n, "cholesky solve shape mismatch");
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }

    /// `L v`
    pub fn mul_lower(&self, v: &[T]) -> Vec<T> {
        let l = &self.lower;
        (0..l.rows())
            .map(|i| (0..=i).map(|k| l[(i, k)] * v[k]).sum())
            .collect()
    }
}

pub fn cholesky<T: Real>(m: &SymMatrix<T>) -> Result<Matrix<T>> {
    Cholesky::factor(m).map(Cholesky::into_lower)
}

pub fn cholesky_solve<T: Real>(m: &SymMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    Ok(Cholesky::factor(m)?.solve(b))
}

/// Dense solve `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `n · eps · max|A|`.
pub fn lu_solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.rows();
    assert!(a.is_square() && b.len() == n, "lu_solve shape mismatch");
    let mut m = a.clone();
    let mut x = b.to_vec();
    let tiny = T::epsilon() * T::of(n.max(1) as f64) * m.max_abs();

    for col in 0..n {
        let (pivot_row, pivot_abs) =
            (col..n)
                .map(|r| (r, m[(r, col)].abs()))
                .fold(
                    (col, T::zero()),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if !(pivot_abs > tiny) {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(pivot_row, k)];
                m[(pivot_row, k)] = tmp;
            }
            x.swap(col, pivot_row);
        }
        let pivot = m[(col, col)];
        for r in (col + 1)..n {
            let f = m[(r, col)] / pivot;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[(col, k)];
                m[(r, k)] -= f * v;
            }
            let xc = x[col];
            x[r] -= f * xc;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= m[(i, k)] * x[k];
        }
        x[i] = s / m[(i, i)];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_examples() {
        let l = cholesky(&SymMatrix::<f64>::identity(2)).unwrap();
        assert_eq!(l, Matrix::identity(2));
        let l = cholesky(&SymMatrix::<f64>::diag(&[4.0, 9.0])).unwrap();
        assert_eq!(l, Matrix::diag(&[2.0, 3.0]));
        let m = SymMatrix::<f64>::from_rows(&[&[1.0, 0.4], &[0.4, 1.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        let expected = Matrix::from_rows(&[&[1.0, 0.0], &[0.4, 0.84f64.sqrt()]]);
        assert!(l.sub(&expected).max_abs() < 1e-15);
        let back = l.matmul(&l.transpose());
        assert!(back.sub(m.as_matrix()).max_abs() < 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SymMatrix::<f64>::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky(&m),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
        assert!(cholesky(&SymMatrix::<f64>::zeros(2)).is_err());
    }

    #[test]
    fn solves_agree() {
        let m =
            SymMatrix::<f64>::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]])
                .unwrap();
        let b = [1.0, -2.0, 0.5];
        let x1 = cholesky_solve(&m, &b).unwrap();
        let x2 = lu_solve(m.as_matrix(), &b).unwrap();
        for (a, c) in x1.iter().zip(&x2) {
            assert!((a - c).abs() < 1e-13);
        }
        let r = m.mul_vec(&x1);
        for (a, c) in r.iter().zip(&b) {
            assert!((a - c).abs() < 1e-13);
        }
    }

    #[test]
    fn lu_needs_pivoting_and_detects_singularity() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(lu_solve(&a, &[2.0, 3.0]).unwrap(), vec![3.0, 2.0]);
        let s = Matrix::<f64>::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(lu_solve(&s, &[1.0, 1.0]).is_none());
    }
}
