//! Linear and logistic regression losses and their synthetic data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, SymMatrix};
use crate::rng::RngStream;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// `F(x; ξ) = ½ (ξ_b - ξ_aᵀ x)²`
    Linear,
    /// `F(x; ξ) = log(1 + exp(-ξ_b ξ_aᵀ x))`, labels in `{-1, +1}`.
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Identity,
    Toeplitz,
    EquiCorr,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub r: f64,
    pub dim: usize,
}

/// Covariate covariance `Σ_a`: identity, Toeplitz `r^{|i-j|}`, or
/// equicorrelation (unit diagonal, `r` elsewhere).
pub fn make_design<T: Real>(spec: &DesignSpec) -> Result<SymMatrix<T>> {
    if spec.dim == 0 {
        return Err(Error::config("dim", "dimension must be positive"));
    }
    if !(0.0..1.0).contains(&spec.r) {
        return Err(Error::config(
            "r",
            format!("correlation {} outside [0, 1)", spec.r),
        ));
    }
    let d = spec.dim;
    let r = spec.r;
    let m = crate::linalg::Matrix::from_fn(d, d, |i, j| {
        T::of(match spec.kind {
            DesignKind::Identity => f64::from(u8::from(i == j)),
            DesignKind::Toeplitz => r.powi((i as i32 - j as i32).abs()),
            DesignKind::EquiCorr => {
                if i == j {
                    1.0
                } else {
                    r
                }
            }
        })
    });
    Ok(SymMatrix::from_matrix_symmetrized(&m))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub features: Vec<T>,
    pub response: T,
}

/// True parameter, covariate law, and noise level of a synthetic problem.
#[derive(Clone, Debug)]
pub struct GroundTruth<T> {
    x_star: Vec<T>,
    sigma_a: SymMatrix<T>,
    chol: Cholesky<T>,
    sigma2: T,
}

impl<T: Real> GroundTruth<T> {
    pub fn new(x_star: Vec<T>, sigma_a: SymMatrix<T>, sigma2: T) -> Result<Self> {
        if x_star.len() != sigma_a.dim() {
            return Err(Error::DimensionMismatch(format!(
                "x* has {} entries, Σ_a is {}x{}",
                x_star.len(),
                sigma_a.dim(),
                sigma_a.dim()
            )));
        }
        if !(sigma2 > T::zero()) {
            return Err(Error::config("sigma2", "noise variance must be positive"));
        }
        let chol = Cholesky::factor(&sigma_a)?;
        Ok(Self {
            x_star,
            sigma_a,
            chol,
            sigma2,
        })
    }

    /// `x*` linearly spaced on `[0, 1]`.
    pub fn linspace(design: &DesignSpec, sigma2: T) -> Result<Self> {
        let d = design.dim;
        let x_star = (0..d)
            .map(|i| {
                if d == 1 {
                    T::zero()
                } else {
                    T::of(i as f64 / (d - 1) as f64)
                }
            })
            .collect();
        Self::new(x_star, make_design(design)?, sigma2)
    }

    pub fn x_star(&self) -> &[T] {
        &self.x_star
    }

    pub fn sigma_a(&self) -> &SymMatrix<T> {
        &self.sigma_a
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<T: Real>(u: T) -> T {
    if u >= T::zero() {
        (T::one() + (-u).exp()).recip()
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(-u))` without overflow.
fn log1p_exp_neg<T: Real>(u: T) -> T {
    if u >= T::zero() {
        (-u).exp().ln_1p()
    } else {
        -u + u.exp().ln_1p()
    }
}

pub fn draw_sample<T: Real>(
    model: ModelKind,
    gt: &GroundTruth<T>,
    rng: &mut RngStream,
) -> Sample<T> {
    let z: Vec<T> = rng.normal_vec(gt.dim());
    let features = gt.chol.mul_lower(&z);
    let mean = dot(&features, &gt.x_star);
    let response = match model {
        ModelKind::Linear => mean + gt.sigma2.sqrt() * rng.standard_normal::<T>(),
        ModelKind::Logistic => {
            if T::of(rng.uniform()) < sigmoid(mean) {
                T::one()
            } else {
                -T::one()
            }
        }
    };
    Sample { features, response }
}

pub fn loss<T: Real>(model: ModelKind, x: &[T], sample: &Sample<T>) -> T {
    let ax = dot(&sample.features, x);
    match model {
        ModelKind::Linear => T::of(0.5) * (sample.response - ax).powi(2),
        ModelKind::Logistic => log1p_exp_neg(sample.response * ax),
    }
}

/// Scalar factors `(g_c, h_c)` with `∇F = g_c ξ_a` and `∇²F = h_c ξ_a ξ_aᵀ`.
pub fn derivative_factors<T: Real>(model: ModelKind, x: &[T], sample: &Sample<T>) -> (T, T) {
    let ax = dot(&sample.features, x);
    match model {
        ModelKind::Linear => (-(sample.response - ax), T::one()),
        ModelKind::Logistic => {
            let u = sample.response * ax;
            let s_neg = sigmoid(-u);
            (-sample.response * s_neg, sigmoid(u) * s_neg)
        }
    }
}

/// Per-sample gradient and Hessian.
pub fn grad_hess<T: Real>(model: ModelKind, x: &[T], sample: &Sample<T>) -> (Vec<T>, SymMatrix<T>) {
    let (gcoef, hcoef) = derivative_factors(model, x, sample);
    let a = &sample.features;
    let g = a.iter().map(|&ai| gcoef * ai).collect();
    (g, SymMatrix::outer(a, hcoef))
}

/// Population Hessian `B* = ∇²f(x*)` and sandwich `Ω* = B*⁻¹ E[∇F ∇Fᵀ] B*⁻¹`.
///
/// Linear models use the closed form `B* = Σ_a`, `Ω* = σ² Σ_a⁻¹`; logistic
/// models average `m_pop` fresh samples at `x*`.
pub fn population_quantities<T: Real>(
    model: ModelKind,
    gt: &GroundTruth<T>,
    m_pop: usize,
    rng: &mut RngStream,
) -> Result<(SymMatrix<T>, SymMatrix<T>)> {
    match model {
        ModelKind::Linear => {
            let inv = gt
                .sigma_a
                .inverse_pd()
                .map_err(|_| Error::DegenerateModel("Σ_a is singular".into()))?;
            Ok((gt.sigma_a.clone(), inv.scale(gt.sigma2)))
        }
        ModelKind::Logistic => {
            if m_pop == 0 {
                return Err(Error::config("m_pop", "need at least one sample"));
            }
            let d = gt.dim();
            let w = T::of(m_pop as f64).recip();
            let mut hess = SymMatrix::zeros(d);
            let mut score = SymMatrix::zeros(d);
            for _ in 0..m_pop {
                let s = draw_sample(ModelKind::Logistic, gt, rng);
                let (g, h) = grad_hess(ModelKind::Logistic, &gt.x_star, &s);
                hess.add_scaled(w, &h);
                score.add_outer(w, &g);
            }
            let inv = hess
                .inverse_pd()
                .map_err(|_| Error::DegenerateModel("population Hessian is singular".into()))?;
            let omega = score.congruence(inv.as_matrix());
            Ok((hess, omega))
        }
    }
}
