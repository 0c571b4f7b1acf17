//! Sketch-and-project with Nesterov acceleration, and the linear operators
//! that describe one solve.
//!
//! One solve of `B Δx = rhs` runs `τ` steps from `z₀ = v₀ = 0`:
//!
//! ```text
//! y_j     = α v_j + (1-α) z_j
//! ω_j     = B S_j (S_jᵀ B² S_j)† S_jᵀ (B y_j - rhs)
//! z_{j+1} = y_j - ω_j
//! v_{j+1} = β v_j + (1-β) y_j - γ ω_j
//! ```
//!
//! The error pair `(z_j - Δx, v_j - Δx)` evolves by the 2x2 block operator
//! `C̃_j` built from the realized projection `Z̃_j`; the marginal
//! `K̃ = (I 0) C̃_{τ-1}⋯C̃_0 (I; I)` maps `z₀ - Δx` to `z_τ - Δx`.

use crate::accel::{SolverParams, Tau};
use crate::error::{Error, Result};
use crate::linalg::{axpy, cholesky_solve, Matrix, SymMatrix, DEFAULT_PINV_REL_TOL};
use crate::scalar::Real;
use crate::sketching::{
    expected_projection_kaczmarz, RngStream, Sketch, SketchSpec, SketchedProjection,
};

/// State and momentum co-state of the inner solver.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveState<T> {
    pub z: Vec<T>,
    pub v: Vec<T>,
    pub step: usize,
}

impl<T: Real> SolveState<T> {
    pub fn zero(d: usize) -> Self {
        Self {
            z: vec![T::zero(); d],
            v: vec![T::zero(); d],
            step: 0,
        }
    }

    /// Advances one accelerated step with an already-built projection.
    pub fn advance(
        &mut self,
        b: &SymMatrix<T>,
        rhs: &[T],
        params: &SolverParams<T>,
        proj: &SketchedProjection<T>,
    ) -> Result<()> {
        let (alpha, beta, gamma) = (params.alpha, params.beta, params.gamma);
        let y: Vec<T> = self
            .v
            .iter()
            .zip(&self.z)
            .map(|(&v, &z)| alpha * v + (T::one() - alpha) * z)
            .collect();
        let mut r = b.mul_vec(&y);
        axpy(-T::one(), rhs, &mut r);
        let omega = proj.direction(&r);
        for i in 0..y.len() {
            self.z[i] = y[i] - omega[i];
            self.v[i] = beta * self.v[i] + (T::one() - beta) * y[i] - gamma * omega[i];
        }
        if self.z.iter().chain(&self.v).any(|x| !x.is_finite()) {
            return Err(Error::NumericalBlowup { step: self.step });
        }
        self.step += 1;
        Ok(())
    }
}

/// The realized projections of one solve, in order.
#[derive(Clone, Debug)]
pub struct TransitionRecord<T> {
    dim: usize,
    projections: Vec<SymMatrix<T>>,
    params: SolverParams<T>,
}

impl<T: Real> TransitionRecord<T> {
    pub fn new(dim: usize, projections: Vec<SymMatrix<T>>, params: SolverParams<T>) -> Self {
        Self {
            dim,
            projections,
            params,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projections(&self) -> &[SymMatrix<T>] {
        &self.projections
    }

    pub fn params(&self) -> &SolverParams<T> {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }
}

/// A `2d x 2d` operator stored as four `d x d` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator<T> {
    pub b11: Matrix<T>,
    pub b12: Matrix<T>,
    pub b21: Matrix<T>,
    pub b22: Matrix<T>,
}

impl<T: Real> BlockOperator<T> {
    pub fn identity(d: usize) -> Self {
        Self {
            b11: Matrix::identity(d),
            b12: Matrix::zeros(d, d),
            b21: Matrix::zeros(d, d),
            b22: Matrix::identity(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.b11.rows()
    }

    /// `self · rhs`
    pub fn compose(&self, rhs: &Self) -> Self {
        Self {
            b11: self.b11.matmul(&rhs.b11).add(&self.b12.matmul(&rhs.b21)),
            b12: self.b11.matmul(&rhs.b12).add(&self.b12.matmul(&rhs.b22)),
            b21: self.b21.matmul(&rhs.b11).add(&self.b22.matmul(&rhs.b21)),
            b22: self.b21.matmul(&rhs.b12).add(&self.b22.matmul(&rhs.b22)),
        }
    }

    pub fn pow(&self, n: usize) -> Self {
        let mut out = Self::identity(self.dim());
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                out = out.compose(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.compose(&base);
            }
        }
        out
    }

    /// `(I 0) · self · (I; I)`
    pub fn marginal(&self) -> Matrix<T> {
        self.b11.add(&self.b12)
    }

    pub fn apply(&self, top: &[T], bottom: &[T]) -> (Vec<T>, Vec<T>) {
        let mut t = self.b11.mul_vec(top);
        axpy(T::one(), &self.b12.mul_vec(bottom), &mut t);
        let mut b = self.b21.mul_vec(top);
        axpy(T::one(), &self.b22.mul_vec(bottom), &mut b);
        (t, b)
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let d = self.dim();
        Matrix::from_fn(2 * d, 2 * d, |i, j| {
            let blk = match (i < d, j < d) {
                (true, true) => &self.b11,
                (true, false) => &self.b12,
                (false, true) => &self.b21,
                (false, false) => &self.b22,
            };
            blk[(i % d, j % d)]
        })
    }
}

/// `C̃ = [[1-α, α], [(1-α)(1-β), α+β-αβ]] ⊗ I - [[1-α, α], [(1-α)γ, αγ]] ⊗ Z̃`.
///
/// Passing the expectation `Z` instead of a realized `Z̃` yields the
/// one-step mean operator `M`.
pub fn transition_block<T: Real>(
    params: &SolverParams<T>,
    ztilde: &SymMatrix<T>,
) -> BlockOperator<T> {
    let d = ztilde.dim();
    let (a, b, g) = (params.alpha, params.beta, params.gamma);
    let one = T::one();
    let i = Matrix::identity(d);
    let z = ztilde.as_matrix();
    let block = |c_i: T, c_z: T| i.scale(c_i).sub(&z.scale(c_z));
    BlockOperator {
        b11: block(one - a, one - a),
        b12: block(a, a),
        b21: block((one - a) * (one - b), (one - a) * g),
        b22: block(a + b - a * b, a * g),
    }
}

/// `K̃ = (I 0) C̃_{τ-1} ⋯ C̃_0 (I; I)`. An empty record gives `I`.
pub fn transition_k<T: Real>(record: &TransitionRecord<T>) -> Matrix<T> {
    let mut product = BlockOperator::identity(record.dim);
    for z in &record.projections {
        product = transition_block(&record.params, z).compose(&product);
    }
    product.marginal()
}

/// Exact expected marginal operator `K = E[K̃]` for sketches whose mean
/// projection is `z`: independence gives `E[C̃] = M^τ`.
pub fn expected_k_from_mean<T: Real>(z: &SymMatrix<T>, params: &SolverParams<T>) -> Matrix<T> {
    match params.tau {
        Tau::Exact => Matrix::zeros(z.dim(), z.dim()),
        Tau::Steps(tau) => transition_block(params, z).pow(tau).marginal(),
    }
}

/// Exact `K = E[K̃]` under Kaczmarz sketching.
pub fn expected_k_kaczmarz<T: Real>(b: &SymMatrix<T>, params: &SolverParams<T>) -> Matrix<T> {
    expected_k_from_mean(&expected_projection_kaczmarz(b), params)
}

/// Runs the inner solver on a supplied sketch sequence.
pub fn solve_with_sketches<T: Real>(
    b: &SymMatrix<T>,
    rhs: &[T],
    params: &SolverParams<T>,
    sketches: &[Sketch<T>],
) -> Result<(Vec<T>, TransitionRecord<T>)> {
    let d = b.dim();
    let rel_tol = T::of(DEFAULT_PINV_REL_TOL);
    let mut state = SolveState::zero(d);
    let mut projections = Vec::with_capacity(sketches.len());
    for s in sketches {
        let p = SketchedProjection::new(b, s, rel_tol)?;
        state.advance(b, rhs, params, &p)?;
        projections.push(p.dense());
    }
    let params = params.with_tau(Tau::Steps(sketches.len()));
    Ok((state.z, TransitionRecord::new(d, projections, params)))
}

fn check_rhs<T: Real>(b: &SymMatrix<T>, rhs: &[T]) -> Result<()> {
    if rhs.len() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} entries, system has {}",
            rhs.len(),
            b.dim()
        )));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite right-hand side".into()));
    }
    Ok(())
}

/// Approximately solves `B Δx = rhs`, returning `z_τ` and the realized
/// projections. `Tau::Exact` solves directly by Cholesky and returns an
/// empty record.
pub fn solve<T: Real>(
    b: &SymMatrix<T>,
    rhs: &[T],
    params: &SolverParams<T>,
    spec: &SketchSpec,
    rng: &mut RngStream,
) -> Result<(Vec<T>, TransitionRecord<T>)> {
    check_rhs(b, rhs)?;
    let d = b.dim();
    match params.tau {
        Tau::Exact => Ok((
            cholesky_solve(b, rhs)?,
            TransitionRecord::new(d, Vec::new(), *params),
        )),
        Tau::Steps(tau) => {
            let sketches: Vec<Sketch<T>> = (0..tau).map(|_| Sketch::draw(spec, d, rng)).collect();
            solve_with_sketches(b, rhs, params, &sketches)
        }
    }
}

/// Same iterates as [`solve`] for the same RNG state, without materializing
/// the projections.
pub fn solve_unrecorded<T: Real>(
    b: &SymMatrix<T>,
    rhs: &[T],
    params: &SolverParams<T>,
    spec: &SketchSpec,
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    check_rhs(b, rhs)?;
    let d = b.dim();
    match params.tau {
        Tau::Exact => cholesky_solve(b, rhs),
        Tau::Steps(tau) => {
            let rel_tol = T::of(DEFAULT_PINV_REL_TOL);
            let mut state = SolveState::zero(d);
            for _ in 0..tau {
                let p = SketchedProjection::new(b, &Sketch::draw(spec, d, rng), rel_tol)?;
                state.advance(b, rhs, params, &p)?;
            }
            Ok(state.z)
        }
    }
}
