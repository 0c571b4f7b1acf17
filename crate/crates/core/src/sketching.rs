//! Sketch distributions and the realized projection
//! `Z̃ = B S (Sᵀ B² S)† Sᵀ B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, sym_eigen, Matrix, SymMatrix, DEFAULT_PINV_REL_TOL};
pub use crate::rng::RngStream;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchKind {
    /// `S` uniform over the standard basis vectors.
    Kaczmarz,
    /// `S` with i.i.d. standard normal entries.
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchSpec {
    kind: SketchKind,
    columns: usize,
}

impl SketchSpec {
    pub fn kaczmarz() -> Self {
        Self {
            kind: SketchKind::Kaczmarz,
            columns: 1,
        }
    }

    pub fn gaussian(columns: usize) -> Result<Self> {
        Self::new(SketchKind::Gaussian, columns)
    }

    /// Kaczmarz sketches always have one column; a different request is ignored.
    pub fn new(kind: SketchKind, columns: usize) -> Result<Self> {
        if columns == 0 {
            return Err(Error::config("columns", "sketch needs at least one column"));
        }
        Ok(match kind {
            SketchKind::Kaczmarz => Self::kaczmarz(),
            SketchKind::Gaussian => Self { kind, columns },
        })
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn columns(&self) -> usize {
        self.columns
    }
}

/// One realized sketching matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Sketch<T> {
    /// The basis vector `e_i`.
    Coordinate(usize),
    Dense(Matrix<T>),
}

impl<T: Real> Sketch<T> {
    pub fn draw(spec: &SketchSpec, d: usize, rng: &mut RngStream) -> Self {
        match spec.kind {
            SketchKind::Kaczmarz => Sketch::Coordinate(rng.uniform_index(d)),
            SketchKind::Gaussian => {
                let data = rng.normal_vec(d * spec.columns);
                Sketch::Dense(Matrix::from_vec(d, spec.columns, data).expect("shape"))
            }
        }
    }

    pub fn to_matrix(&self, d: usize) -> Matrix<T> {
        match self {
            Sketch::Coordinate(i) => {
                let mut m = Matrix::zeros(d, 1);
                m[(*i, 0)] = T::one();
                m
            }
            Sketch::Dense(m) => m.clone(),
        }
    }
}

/// Draws a `d x s` sketching matrix.
pub fn draw_sketch<T: Real>(spec: &SketchSpec, d: usize, rng: &mut RngStream) -> Matrix<T> {
    Sketch::draw(spec, d, rng).to_matrix(d)
}

/// Factored form of one realized projection.
///
/// With `C = B S` and `Cᵀ C = V Λ Vᵀ`, the nonzero spectrum gives
/// `u_k = C v_k / √λ_k` and `w_k = S v_k / √λ_k`, so that
/// `Z̃ = Σ u_k u_kᵀ` and the sketched correction
/// `B S (Sᵀ B² S)† Sᵀ r = Σ u_k (w_kᵀ r)`.
#[derive(Clone, Debug)]
pub struct SketchedProjection<T> {
    dim: usize,
    u: Vec<Vec<T>>,
    w: Vec<Vec<T>>,
}

impl<T: Real> SketchedProjection<T> {
    pub fn new(b: &SymMatrix<T>, sketch: &Sketch<T>, rel_tol: T) -> Result<Self> {
        let d = b.dim();
        match sketch {
            Sketch::Coordinate(i) => {
                let c = b.as_matrix().column(*i);
                let norm2 = dot(&c, &c);
                if !norm2.is_finite() {
                    return Err(Error::InvalidMatrix("non-finite sketched column".into()));
                }
                if norm2 == T::zero() {
                    return Ok(Self::zero(d));
                }
                let inv = norm2.sqrt().recip();
                let u = c.iter().map(|&v| v * inv).collect();
                let mut w = vec![T::zero(); d];
                w[*i] = inv;
                Ok(Self {
                    dim: d,
                    u: vec![u],
                    w: vec![w],
                })
            }
            Sketch::Dense(s) => Self::from_matrix(b, s, rel_tol),
        }
    }

    fn from_matrix(b: &SymMatrix<T>, s: &Matrix<T>, rel_tol: T) -> Result<Self> {
        let d = b.dim();
        if s.rows() != d {
            return Err(Error::DimensionMismatch(format!(
                "sketch has {} rows, system has {d}",
                s.rows()
            )));
        }
        if !s.is_finite() || !b.as_matrix().is_finite() {
            return Err(Error::InvalidMatrix("non-finite sketch input".into()));
        }
        let c = b.as_matrix().matmul(s);
        let gram = SymMatrix::from_matrix_symmetrized(&c.transpose().matmul(&c));
        let e = sym_eigen(&gram)?;
        let top = e.max_value();
        if !(top > T::zero()) {
            return Ok(Self::zero(d));
        }
        let cutoff = rel_tol * top;
        let mut u = Vec::new();
        let mut w = Vec::new();
        for (k, &l) in e.values().iter().enumerate() {
            if l <= cutoff {
                continue;
            }
            let vk = e.vectors().column(k);
            let inv = l.sqrt().recip();
            u.push(c.mul_vec(&vk).into_iter().map(|x| x * inv).collect());
            w.push(s.mul_vec(&vk).into_iter().map(|x| x * inv).collect());
        }
        Ok(Self { dim: d, u, w })
    }

    fn zero(dim: usize) -> Self {
        Self {
            dim,
            u: Vec::new(),
            w: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.u.len()
    }

    /// Orthonormal basis of the range of `Z̃`.
    pub fn basis(&self) -> &[Vec<T>] {
        &self.u
    }

    pub fn dense(&self) -> SymMatrix<T> {
        let mut z = SymMatrix::zeros(self.dim);
        for uk in &self.u {
            z.add_outer(T::one(), uk);
        }
        z
    }

    /// `Z̃ x`
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for uk in &self.u {
            crate::linalg::axpy(dot(uk, x), uk, &mut out);
        }
        out
    }

    /// `B S (Sᵀ B² S)† Sᵀ r`
    pub fn direction(&self, r: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for (uk, wk) in self.u.iter().zip(&self.w) {
            crate::linalg::axpy(dot(wk, r), uk, &mut out);
        }
        out
    }
}

/// Realized projection `Z̃ = B S (Sᵀ B² S)† Sᵀ B` for an explicit sketch matrix.
pub fn projection<T: Real>(b: &SymMatrix<T>, s: &Matrix<T>, rel_tol: T) -> Result<SymMatrix<T>> {
    Ok(SketchedProjection::from_matrix(b, s, rel_tol)?.dense())
}

/// Exact `E[Z̃]` under Kaczmarz sketching: `(1/d) Σ_i (B e_i)(B e_i)ᵀ / ‖B e_i‖²`.
/// Zero columns contribute nothing.
pub fn expected_projection_kaczmarz<T: Real>(b: &SymMatrix<T>) -> SymMatrix<T> {
    let d = b.dim();
    let mut z = SymMatrix::zeros(d);
    let weight = T::of(d as f64).recip();
    for i in 0..d {
        let c = b.as_matrix().column(i);
        let n2 = dot(&c, &c);
        if n2 > T::zero() {
            z.add_outer(weight / n2, &c);
        }
    }
    z
}

/// Draws `m` independent realized projections.
pub fn sample_projections<T: Real>(
    b: &SymMatrix<T>,
    spec: &SketchSpec,
    m: usize,
    rng: &mut RngStream,
) -> Result<Vec<SketchedProjection<T>>> {
    let rel_tol = T::of(DEFAULT_PINV_REL_TOL);
    (0..m)
        .map(|_| SketchedProjection::new(b, &Sketch::draw(spec, b.dim(), rng), rel_tol))
        .collect()
}

/// Monte-Carlo estimate of `E[Z̃]` from `m` draws.
pub fn expected_projection_mc<T: Real>(
    b: &SymMatrix<T>,
    spec: &SketchSpec,
    m: usize,
    rng: &mut RngStream,
) -> Result<SymMatrix<T>> {
    if m == 0 {
        return Err(Error::config("mc_samples", "need at least one sample"));
    }
    let d = b.dim();
    let rel_tol = T::of(DEFAULT_PINV_REL_TOL);
    let mut acc = SymMatrix::zeros(d);
    for _ in 0..m {
        let p = SketchedProjection::new(b, &Sketch::draw(spec, d, rng), rel_tol)?;
        for uk in p.basis() {
            acc.add_outer(T::one(), uk);
        }
    }
    Ok(acc.scale(T::of(m as f64).recip()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pseudo_inverse;
    use proptest::prelude::*;

    /// Literal transcription of `B S (Sᵀ B² S)† Sᵀ B`.
    fn projection_oracle(b: &SymMatrix<f64>, s: &Matrix<f64>) -> Matrix<f64> {
        let bm = b.as_matrix();
        let bs = bm.matmul(s);
        let inner = SymMatrix::from_matrix_symmetrized(&bs.transpose().matmul(&bs));
        let pinv = pseudo_inverse(&inner, 1e-12).unwrap();
        bs.matmul(pinv.as_matrix()).matmul(&bs.transpose())
    }

    fn e(i: usize, d: usize) -> Matrix<f64> {
        Sketch::<f64>::Coordinate(i).to_matrix(d)
    }

    #[test]
    fn kaczmarz_frequencies() {
        let mut rng = RngStream::new(1);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            let s: Matrix<f64> = draw_sketch(&SketchSpec::kaczmarz(), 3, &mut rng);
            assert_eq!(s.as_slice().iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(s.as_slice().iter().filter(|&&v| v == 0.0).count(), 2);
            counts[s.column(0).iter().position(|&v| v == 1.0).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = RngStream::new(2);
        let spec = SketchSpec::gaussian(1).unwrap();
        let mut vals = Vec::new();
        for _ in 0..100_000 {
            let s: Matrix<f64> = draw_sketch(&spec, 4, &mut rng);
            assert_eq!((s.rows(), s.cols()), (4, 1));
            vals.push(s[(0, 0)]);
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.03);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let spec = SketchSpec::gaussian(2).unwrap();
        let a: Matrix<f64> = draw_sketch(&spec, 5, &mut RngStream::new(42));
        let b: Matrix<f64> = draw_sketch(&spec, 5, &mut RngStream::new(42));
        assert_eq!(a, b);
    }

    #[test]
    fn kaczmarz_spec_forces_one_column() {
        let s = SketchSpec::new(SketchKind::Kaczmarz, 4).unwrap();
        assert_eq!(s.columns(), 1);
        assert!(SketchSpec::gaussian(0).is_err());
    }

    #[test]
    fn projection_examples() {
        let z = projection(&SymMatrix::identity(3), &e(1, 3), 1e-12).unwrap();
        assert_eq!(z, SymMatrix::<f64>::diag(&[0.0, 1.0, 0.0]));
        let z = projection(&SymMatrix::<f64>::diag(&[1.0, 2.0]), &e(1, 2), 1e-12).unwrap();
        assert!(z.sub(&SymMatrix::<f64>::diag(&[0.0, 1.0])).max_abs() < 1e-15);
        let z = projection(
            &SymMatrix::<f64>::diag(&[1.0, 2.0]),
            &Matrix::zeros(2, 1),
            1e-12,
        )
        .unwrap();
        assert_eq!(z, SymMatrix::zeros(2));
    }

    #[test]
    fn coordinate_fast_path_matches_dense_path() {
        let b =
            SymMatrix::<f64>::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 0.5], &[0.0, 0.5, 1.0]])
                .unwrap();
        for i in 0..3 {
            let fast = SketchedProjection::new(&b, &Sketch::Coordinate(i), 1e-12).unwrap();
            let dense = projection(&b, &e(i, 3), 1e-12).unwrap();
            assert!(fast.dense().sub(&dense).max_abs() < 1e-14);
            let r = [0.3, -1.0, 2.0];
            let dir = fast.direction(&r);
            // B e_i (e_iᵀ B² e_i)⁻¹ e_iᵀ r
            let c = b.as_matrix().column(i);
            let n2 = dot(&c, &c);
            for k in 0..3 {
                assert!((dir[k] - c[k] * r[i] / n2).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_column_gives_zero_projection() {
        let b = SymMatrix::<f64>::diag(&[1.0, 0.0]);
        let p = SketchedProjection::new(&b, &Sketch::Coordinate(1), 1e-12).unwrap();
        assert_eq!(p.rank(), 0);
        assert_eq!(p.dense(), SymMatrix::zeros(2));
    }

    #[test]
    fn expected_kaczmarz_examples() {
        let z = expected_projection_kaczmarz(&SymMatrix::<f64>::identity(4));
        assert!(z.sub(&SymMatrix::identity(4).scale(0.25)).max_abs() < 1e-15);
        let z = expected_projection_kaczmarz(&SymMatrix::<f64>::diag(&[1.0, 2.0]));
        assert!(z.sub(&SymMatrix::identity(2).scale(0.5)).max_abs() < 1e-15);

        let b = SymMatrix::<f64>::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]]).unwrap();
        let brute = projection_oracle(&b, &e(0, 2))
            .add(&projection_oracle(&b, &e(1, 2)))
            .scale(0.5);
        let z = expected_projection_kaczmarz(&b);
        assert!(z.as_matrix().sub(&brute).max_abs() < 1e-14);
        assert!(z.lambda_min().unwrap() > 0.0);
    }

    #[test]
    fn monte_carlo_expectation() {
        let b = SymMatrix::<f64>::identity(4);
        let mut rng = RngStream::new(3);
        let mc = expected_projection_mc(&b, &SketchSpec::kaczmarz(), 100_000, &mut rng).unwrap();
        assert!(mc.sub(&expected_projection_kaczmarz(&b)).norm() <= 0.02);

        let b = SymMatrix::<f64>::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        let spec = SketchSpec::gaussian(1).unwrap();
        let one = expected_projection_mc(&b, &spec, 1, &mut RngStream::new(9)).unwrap();
        let s: Matrix<f64> = draw_sketch(&spec, 2, &mut RngStream::new(9));
        assert!(one.sub(&projection(&b, &s, 1e-12).unwrap()).max_abs() < 1e-14);

        let full = SketchSpec::gaussian(2).unwrap();
        let z = expected_projection_mc(&b, &full, 50, &mut rng).unwrap();
        assert!(z.sub(&SymMatrix::identity(2)).max_abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_is_unbiased_over_batches() {
        let b =
            SymMatrix::<f64>::from_rows(&[&[3.0, 1.0, 0.2], &[1.0, 2.0, 0.4], &[0.2, 0.4, 1.0]])
                .unwrap();
        let exact = expected_projection_kaczmarz(&b);
        let mut rng = RngStream::new(11);
        let mut mean = SymMatrix::zeros(3);
        let batches = 400;
        for _ in 0..batches {
            let z = expected_projection_mc(&b, &SketchSpec::kaczmarz(), 50, &mut rng).unwrap();
            mean.add_scaled(1.0 / batches as f64, &z);
        }
        assert!(mean.sub(&exact).max_abs() < 0.01);
    }

    fn pd_and_sketch() -> impl Strategy<Value = (SymMatrix<f64>, Matrix<f64>)> {
        (2usize..=6, 1usize..=3).prop_flat_map(|(d, s)| {
            (
                proptest::collection::vec(-1.0f64..1.0, d * d),
                proptest::collection::vec(-2.0f64..2.0, d * s),
            )
                .prop_map(move |(a, sk)| {
                    let a = Matrix::from_vec(d, d, a).unwrap();
                    let b =
                        SymMatrix::from_matrix_symmetrized(&a.matmul(&a.transpose())).shifted(0.1);
                    (b, Matrix::from_vec(d, s, sk).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn realized_projection_is_orthogonal_projector((b, s) in pd_and_sketch()) {
            let z = projection(&b, &s, 1e-12).unwrap();
            let zm = z.as_matrix();
            prop_assert!(zm.matmul(zm).sub(zm).max_abs() <= 1e-9);
            prop_assert!(zm.asymmetry() <= 1e-9);
            let e = z.eigen().unwrap();
            prop_assert!(e.min_value() >= -1e-9 && e.max_value() <= 1.0 + 1e-9);
            prop_assert!(zm.sub(&projection_oracle(&b, &s)).max_abs() <= 1e-8);
        }

        #[test]
        fn kaczmarz_expectation_is_pd((b, _s) in pd_and_sketch()) {
            let z = expected_projection_kaczmarz(&b);
            prop_assert!(z.lambda_min().unwrap() > 0.0);
            prop_assert!(z.lambda_max().unwrap() <= 1.0 + 1e-12);
        }
    }
}
