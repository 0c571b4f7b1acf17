//! Problem parameters `(μ, ν)` of the sketch distribution and the
//! acceleration triple `(α, β, γ)` derived from them.
//!
//! `μ = λ_min(Z)` and `ν = λ_max(Z^{-1/2} A Z^{-1/2})` with `Z = E[Z̃]` and
//! `A = E[Z̃ Z⁻¹ Z̃]`. They always satisfy `1 ≤ ν ≤ 1/μ`, which keeps
//! `α = 1/(1+γν) ∈ (0,1)`, `β = 1-√(μ/ν) ∈ [0,1)` and `γ = 1/√(μν) ≥ 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, SymMatrix};
use crate::scalar::Real;
use crate::sketching::{sample_projections, RngStream, SketchSpec};

/// Lower clamp on Monte-Carlo estimates of `μ`.
pub const MU_FLOOR: f64 = 1e-8;

/// Default number of sketch draws for Monte-Carlo `(μ, ν)` estimates.
pub const DEFAULT_MC_SAMPLES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuNu<T> {
    pub mu: T,
    pub nu: T,
}

impl<T: Real> MuNu<T> {
    /// Clamps into the admissible region: `μ ∈ [MU_FLOOR, 1]`, then `ν ∈ [1, 1/μ]`.
    pub fn clamped(mu: T, nu: T) -> Self {
        let mu = mu.max(T::of(MU_FLOOR)).min(T::one());
        let nu = nu.max(T::one()).min(mu.recip());
        Self { mu, nu }
    }

    /// Validating constructor; rejects pairs outside `μ ∈ (0,1]`, `1 ≤ ν ≤ 1/μ`.
    pub fn new(mu: T, nu: T) -> Result<Self> {
        let slack = T::tol(1e-12, 8.0);
        let ok = mu > T::zero()
            && mu <= T::one()
            && nu >= T::one() - slack
            && nu <= mu.recip() * (T::one() + slack);
        if !ok {
            return Err(Error::config(
                "mu_nu",
                format!("({mu}, {nu}) violates 1 <= nu <= 1/mu, mu in (0, 1]"),
            ));
        }
        Ok(Self::clamped(mu, nu))
    }

    /// Per-step contraction factor `1 - √(μ/ν)`.
    pub fn rate(&self) -> T {
        T::one() - (self.mu / self.nu).sqrt()
    }

    /// `2τ (1 - √(μ/ν))^{τ-2}`, the bound on the expected marginal operator.
    pub fn operator_bound(&self, tau: usize) -> T {
        T::of(2.0 * tau as f64) * self.rate().powf(T::of(tau as f64 - 2.0))
    }
}

/// Number of inner sketch steps, or a direct solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tau {
    Steps(usize),
    Exact,
}

impl std::fmt::Display for Tau {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tau::Steps(n) => write!(f, "{n}"),
            Tau::Exact => f.write_str("exact"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub tau: Tau,
}

impl<T: Real> SolverParams<T> {
    pub fn new(alpha: T, beta: T, gamma: T, tau: Tau) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            tau,
        }
    }

    /// `(α, β, γ) = (1/2, 0, 1)`: plain sketch-and-project.
    pub fn unaccelerated(tau: Tau) -> Self {
        Self::new(T::of(0.5), T::zero(), T::one(), tau)
    }

    pub fn exact_solve() -> Self {
        Self::unaccelerated(Tau::Exact)
    }

    pub fn with_tau(self, tau: Tau) -> Self {
        Self { tau, ..self }
    }

    pub fn steps(&self) -> Option<usize> {
        match self.tau {
            Tau::Steps(n) => Some(n),
            Tau::Exact => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMode {
    /// The three formulas evaluated at the estimated `(μ, ν)`.
    Estimated,
    /// `μν = γ = 1`, i.e. `ν` replaced by `1/μ`.
    Unit,
}

pub fn params_from_mu_nu<T: Real>(mn: MuNu<T>, tau: Tau, mode: GammaMode) -> SolverParams<T> {
    let nu = match mode {
        GammaMode::Estimated => mn.nu,
        GammaMode::Unit => mn.mu.recip(),
    };
    let gamma = match mode {
        GammaMode::Estimated => (mn.mu * nu).sqrt().recip().max(T::one()),
        GammaMode::Unit => T::one(),
    };
    let alpha = (T::one() + gamma * nu).recip();
    let beta = (T::one() - (mn.mu / nu).sqrt()).max(T::zero());
    SolverParams::new(alpha, beta, gamma, tau)
}

/// `μ` and `ν` from `Z` and the rank-structured draws `{u_k}` of each projection,
/// weighting every draw by `weight`.
fn mu_nu_from_parts<T: Real>(
    z: &SymMatrix<T>,
    draws: &[&[Vec<T>]],
    weight: T,
    eig_floor: T,
) -> Result<(T, T)> {
    let d = z.dim();
    let e = z.eigen()?;
    let lmin = e.min_value();
    if !(e.max_value() >= eig_floor) {
        return Err(Error::DegenerateSketchDistribution(format!(
            "largest eigenvalue of E[Z] is {}",
            e.max_value()
        )));
    }
    let z_inv = e.map_values(|l| l.max(eig_floor).recip());
    let z_inv_sqrt = e.map_values(|l| l.max(eig_floor).sqrt().recip());

    // A = E[Z̃ Z⁻¹ Z̃] with Z̃ = U Uᵀ gives U (Uᵀ Z⁻¹ U) Uᵀ.
    let mut a = SymMatrix::zeros(d);
    for basis in draws {
        match basis.len() {
            0 => {}
            1 => {
                let u = &basis[0];
                a.add_outer(weight * z_inv.quad_form(u), u);
            }
            _ => {
                let zu: Vec<Vec<T>> = basis.iter().map(|u| z_inv.mul_vec(u)).collect();
                let mut m = crate::linalg::Matrix::zeros(d, d);
                for uk in basis.iter() {
                    for (ul, zul) in basis.iter().zip(&zu) {
                        m.add_outer(weight * dot(uk, zul), uk, ul);
                    }
                }
                a.add_scaled(T::one(), &SymMatrix::from_matrix_symmetrized(&m));
            }
        }
    }
    let n = a.congruence(&z_inv_sqrt.into_matrix());
    let nu = n.lambda_max()?;
    Ok((lmin, nu))
}

/// Exact `(μ, ν)` for Kaczmarz sketching by enumerating the `d` basis vectors.
pub fn mu_nu_exact_kaczmarz<T: Real>(b: &SymMatrix<T>) -> Result<MuNu<T>> {
    let d = b.dim();
    let mut units: Vec<Vec<Vec<T>>> = Vec::with_capacity(d);
    let mut z = SymMatrix::zeros(d);
    let w = T::of(d as f64).recip();
    for i in 0..d {
        let c = b.as_matrix().column(i);
        let n2 = dot(&c, &c);
        if !n2.is_finite() {
            return Err(Error::InvalidMatrix("non-finite column".into()));
        }
        if n2 == T::zero() {
            units.push(Vec::new());
            continue;
        }
        let inv = n2.sqrt().recip();
        let u: Vec<T> = c.iter().map(|&v| v * inv).collect();
        z.add_outer(w, &u);
        units.push(vec![u]);
    }
    let floor = T::tol(1e-14, 64.0);
    let draws: Vec<&[Vec<T>]> = units.iter().map(|u| u.as_slice()).collect();
    let (lmin, nu) = mu_nu_from_parts(&z, &draws, w, floor)?;
    if !(lmin > floor) {
        return Err(Error::DegenerateSketchDistribution(format!(
            "E[Z] is numerically singular (λ_min = {lmin})"
        )));
    }
    Ok(MuNu::clamped(lmin, nu))
}

/// Monte-Carlo `(μ, ν)`: `Z` and `A` are estimated from the same `m` draws.
pub fn mu_nu_mc<T: Real>(
    b: &SymMatrix<T>,
    spec: &SketchSpec,
    m: usize,
    rng: &mut RngStream,
) -> Result<MuNu<T>> {
    if m < 2 {
        return Err(Error::config("mc_samples_mu_nu", "need at least two draws"));
    }
    let projections = sample_projections(b, spec, m, rng)?;
    let w = T::of(m as f64).recip();
    let mut z = SymMatrix::zeros(b.dim());
    for p in &projections {
        for u in p.basis() {
            z.add_outer(w, u);
        }
    }
    let draws: Vec<&[Vec<T>]> = projections.iter().map(|p| p.basis()).collect();
    let (lmin, nu) = mu_nu_from_parts(&z, &draws, w, T::of(MU_FLOOR))?;
    Ok(MuNu::clamped(lmin, nu))
}
