use super::{lu_solve, sym_eigen, Matrix, SymMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solves `M Σ + Σ M = R` for symmetric `M`, `R` by vectorizing into the
/// Kronecker-sum system `(I ⊗ M + M ⊗ I) vec(Σ) = vec(R)` and running a dense
/// pivoted LU on the `d² x d²` matrix.
pub fn kron_lyap_solve<T: Real>(m: &SymMatrix<T>, rhs: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let d = m.dim();
    if rhs.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov operator is {d}x{d}, right-hand side is {0}x{0}",
            rhs.dim()
        )));
    }

    let e = sym_eigen(m)?;
    let vals = e.values();
    let scale = vals.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let mut min_pair = T::infinity();
    for &a in vals {
        for &b in vals {
            min_pair = min_pair.min((a + b).abs());
        }
    }
    if !(min_pair > T::tol(1e-14, 64.0) * scale) {
        return Err(Error::SingularLyapunov {
            min_pair_sum: min_pair.as_f64(),
        });
    }

    let n = d * d;
    let mut q = Matrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let row = i * d + j;
            for k in 0..d {
                // (M Σ)_ij = Σ_k m_ik σ_kj
                q[(row, k * d + j)] += m[(i, k)];
                // (Σ M)_ij = Σ_k σ_ik m_kj
                q[(row, i * d + k)] += m[(k, j)];
            }
        }
    }
    let sol = lu_solve(&q, rhs.as_matrix().as_slice()).ok_or(Error::SingularLyapunov {
        min_pair_sum: min_pair.as_f64(),
    })?;
    let sigma = Matrix::from_vec(d, d, sol)?;
    Ok(SymMatrix::from_matrix_symmetrized(&sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residual(m: &SymMatrix<f64>, s: &SymMatrix<f64>, r: &SymMatrix<f64>) -> f64 {
        let (m, s) = (m.as_matrix(), s.as_matrix());
        m.matmul(s).add(&s.matmul(m)).sub(r.as_matrix()).max_abs()
    }

    #[test]
    fn scalar_cases() {
        let i = SymMatrix::<f64>::identity(3);
        let s = kron_lyap_solve(&i, &i.scale(2.0)).unwrap();
        assert!(s.sub(&i).max_abs() < 1e-14);
        let g =
            SymMatrix::<f64>::from_rows(&[&[2.0, 0.3, 0.1], &[0.3, 1.0, -0.2], &[0.1, -0.2, 0.7]])
                .unwrap();
        let s = kron_lyap_solve(&i, &g).unwrap();
        assert!(s.sub(&g.scale(0.5)).max_abs() < 1e-14);
    }

    #[test]
    fn diagonal_entrywise() {
        // σ_ij = r_ij / (λ_i + λ_j)
        let m = SymMatrix::<f64>::diag(&[1.0, 2.0]);
        let r = SymMatrix::<f64>::from_rows(&[&[2.0, 3.0], &[3.0, 8.0]]).unwrap();
        let s = kron_lyap_solve(&m, &r).unwrap();
        let expected = SymMatrix::<f64>::from_rows(&[&[1.0, 1.0], &[1.0, 2.0]]).unwrap();
        assert!(s.sub(&expected).max_abs() < 1e-14);
    }

    #[test]
    fn singular_operator() {
        let m = SymMatrix::<f64>::diag(&[1.0, -1.0]);
        let r = SymMatrix::identity(2);
        assert!(matches!(
            kron_lyap_solve(&m, &r),
            Err(Error::SingularLyapunov { .. })
        ));
        assert!(kron_lyap_solve(&SymMatrix::zeros(2), &r).is_err());
    }

    fn pd_and_rhs() -> impl Strategy<Value = (SymMatrix<f64>, SymMatrix<f64>)> {
        (1usize..=10).prop_flat_map(|d| {
            (
                proptest::collection::vec(-1.0f64..1.0, d * d),
                proptest::collection::vec(-2.0f64..2.0, d * d),
                0.05f64..2.0,
            )
                .prop_map(move |(a, r, shift)| {
                    let a = Matrix::from_vec(d, d, a).unwrap();
                    let m = SymMatrix::from_matrix_symmetrized(&a.matmul(&a.transpose()))
                        .shifted(shift);
                    let r = SymMatrix::from_matrix_symmetrized(&Matrix::from_vec(d, d, r).unwrap());
                    (m, r)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn residual_invariant((m, r) in pd_and_rhs()) {
            let s = kron_lyap_solve(&m, &r).unwrap();
            prop_assert!(residual(&m, &s, &r) <= 1e-10 * (1.0 + r.max_abs()));
        }
    }
}
