//! Ground truth for the limiting distribution: `K*`, `Γ*`, the Lyapunov
//! covariance `Σ*`, the unaccelerated comparison covariance, and the scalar
//! recursion `p_τ(z)` that controls `‖K*‖`.
//!
//! `Σ*` solves
//!
//! ```text
//! [(I - K*) - ζI] Σ* + Σ* [(I - K*) - ζI] = Γ*,   Γ* = E[(I - K̃*) Ω* (I - K̃*)ᵀ]
//! ```
//!
//! with `ζ = 1{φ = 1} / (2 C_φ)`.

use crate::accel::{mu_nu_exact_kaczmarz, mu_nu_mc, params_from_mu_nu, MuNu, SolverParams, Tau};
use crate::error::{Error, Result};
use crate::linalg::{kron_lyap_solve, Matrix, SymMatrix, DEFAULT_PINV_REL_TOL};
use crate::models::{population_quantities, GroundTruth, ModelKind};
use crate::nasketch::{expected_k_from_mean, expected_k_kaczmarz};
use crate::newton::{SketchConfig, StepSchedule};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::sketching::{
    expected_projection_mc, Sketch, SketchKind, SketchSpec, SketchedProjection,
};

/// Largest number of sketch sequences `d^τ` that exact enumeration visits.
pub const ENUM_BUDGET: u128 = 1_000_000;
/// Draws for Monte-Carlo `Z`, `(μ, ν)` and `Γ*`.
pub const ORACLE_MC_SAMPLES: usize = 100_000;
/// Draws for the logistic population Hessian and score covariance.
pub const POPULATION_SAMPLES: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaMethod {
    /// Average over all `d^τ` Kaczmarz sequences.
    ExactEnum,
    MonteCarlo(usize),
}

/// `Γ*` with the largest entrywise standard error when estimated.
#[derive(Clone, Debug)]
pub struct GammaStar<T> {
    pub value: SymMatrix<T>,
    pub std_error: Option<T>,
    pub method: GammaMethod,
}

/// `K̃` for a realized projection sequence, applied column by column: each
/// step costs one application of `Z̃` per column instead of a block product.
pub fn k_tilde<T: Real>(
    params: &SolverParams<T>,
    projections: &[SketchedProjection<T>],
) -> Matrix<T> {
    let d = projections.first().map_or(0, |p| p.dim());
    let mut e = Matrix::identity(d);
    let mut f = Matrix::identity(d);
    for p in projections {
        inner_step_columns(params, p, &mut e, &mut f);
    }
    e
}

/// Applies `C̃` to the column pairs of `(e, f)`; columns are stored as rows.
fn inner_step_columns<T: Real>(
    params: &SolverParams<T>,
    p: &SketchedProjection<T>,
    e: &mut Matrix<T>,
    f: &mut Matrix<T>,
) {
    let (a, b, g) = (params.alpha, params.beta, params.gamma);
    let one = T::one();
    let d = e.rows();
    for c in 0..d {
        let y: Vec<T> = (0..d)
            .map(|i| (one - a) * e[(i, c)] + a * f[(i, c)])
            .collect();
        let zy = p.apply(&y);
        for i in 0..d {
            e[(i, c)] = y[i] - zy[i];
            f[(i, c)] = b * f[(i, c)] + (one - b) * y[i] - g * zy[i];
        }
    }
}

fn enumeration_count(d: usize, tau: usize) -> u128 {
    (d as u128).checked_pow(tau as u32).unwrap_or(u128::MAX)
}

/// Depth-first walk over all `d^τ` index sequences, sharing prefix work.
fn enumerate<S: Clone>(
    d: usize,
    tau: usize,
    budget: u128,
    root: S,
    step: &impl Fn(&S, usize) -> S,
    leaf: &mut impl FnMut(&S),
) -> Result<()> {
    let count = enumeration_count(d, tau);
    if count > budget {
        return Err(Error::EnumTooLarge { count, budget });
    }
    fn walk<S: Clone>(
        depth: usize,
        d: usize,
        node: &S,
        step: &impl Fn(&S, usize) -> S,
        leaf: &mut impl FnMut(&S),
    ) {
        if depth == 0 {
            leaf(node);
            return;
        }
        for i in 0..d {
            walk(depth - 1, d, &step(node, i), step, leaf);
        }
    }
    walk(tau, d, &root, step, leaf);
    Ok(())
}

fn kaczmarz_projections<T: Real>(b: &SymMatrix<T>) -> Result<Vec<SketchedProjection<T>>> {
    (0..b.dim())
        .map(|i| SketchedProjection::new(b, &Sketch::Coordinate(i), T::of(DEFAULT_PINV_REL_TOL)))
        .collect()
}

/// `(I - K) Ω (I - K)ᵀ`
fn sandwich<T: Real>(k: &Matrix<T>, omega: &SymMatrix<T>) -> SymMatrix<T> {
    let r = Matrix::identity(k.rows()).sub(k);
    SymMatrix::from_matrix_symmetrized(&r.matmul(omega.as_matrix()).matmul(&r.transpose()))
}

/// Streaming mean of sandwiches with the entrywise standard error.
struct SandwichMean<T> {
    sum: Matrix<T>,
    sum_sq: Matrix<T>,
    n: usize,
}

impl<T: Real> SandwichMean<T> {
    fn new(d: usize) -> Self {
        Self {
            sum: Matrix::zeros(d, d),
            sum_sq: Matrix::zeros(d, d),
            n: 0,
        }
    }

    fn push(&mut self, s: &SymMatrix<T>) {
        self.sum.add_scaled(T::one(), s.as_matrix());
        self.sum_sq
            .add_scaled(T::one(), &s.as_matrix().map(|v| v * v));
        self.n += 1;
    }

    fn finish(self, method: GammaMethod) -> GammaStar<T> {
        let n = T::of(self.n as f64);
        let mean = self.sum.scale(n.recip());
        let std_error = match method {
            GammaMethod::ExactEnum => None,
            GammaMethod::MonteCarlo(_) => {
                let second = self.sum_sq.scale(n.recip());
                let var = second.sub(&mean.map(|v| v * v));
                Some(var.map(|v| (v.max(T::zero()) / n).sqrt()).max_abs())
            }
        };
        GammaStar {
            value: SymMatrix::from_matrix_symmetrized(&mean),
            std_error,
            method,
        }
    }
}

/// `Γ* = E[(I - K̃*) Ω* (I - K̃*)ᵀ]` at `B*`.
///
/// `Tau::Exact` gives `K̃ = 0` and `Γ* = Ω*`; `τ = 0` gives `K̃ = I` and `Γ* = 0`.
pub fn gamma_star<T: Real>(
    b_star: &SymMatrix<T>,
    omega_star: &SymMatrix<T>,
    params: &SolverParams<T>,
    spec: &SketchSpec,
    method: GammaMethod,
    rng: &mut RngStream,
) -> Result<GammaStar<T>> {
    gamma_star_with_budget(b_star, omega_star, params, spec, method, ENUM_BUDGET, rng)
}

pub fn gamma_star_with_budget<T: Real>(
    b_star: &SymMatrix<T>,
    omega_star: &SymMatrix<T>,
    params: &SolverParams<T>,
    spec: &SketchSpec,
    method: GammaMethod,
    budget: u128,
    rng: &mut RngStream,
) -> Result<GammaStar<T>> {
    let d = b_star.dim();
    if omega_star.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "B* is {d}x{d}, Ω* is {}",
            omega_star.dim()
        )));
    }
    let tau = match params.tau {
        Tau::Exact => {
            return Ok(GammaStar {
                value: omega_star.clone(),
                std_error: None,
                method: GammaMethod::ExactEnum,
            })
        }
        Tau::Steps(n) => n,
    };
    let mut acc = SandwichMean::new(d);
    match method {
        GammaMethod::ExactEnum => {
            if spec.kind() != SketchKind::Kaczmarz {
                return Err(Error::config(
                    "gamma_method",
                    "exact enumeration needs Kaczmarz sketching",
                ));
            }
            let projs = kaczmarz_projections(b_star)?;
            let step = |node: &(Matrix<T>, Matrix<T>), i: usize| {
                let (mut e, mut f) = node.clone();
                inner_step_columns(params, &projs[i], &mut e, &mut f);
                (e, f)
            };
            let root = (Matrix::identity(d), Matrix::identity(d));
            enumerate(d, tau, budget, root, &step, &mut |(e, _)| {
                acc.push(&sandwich(e, omega_star))
            })?;
        }
        GammaMethod::MonteCarlo(m) => {
            if m == 0 {
                return Err(Error::config("mc_samples", "need at least one draw"));
            }
            let rel_tol = T::of(DEFAULT_PINV_REL_TOL);
            let mut k = Matrix::identity(d);
            for _ in 0..m {
                if tau > 0 {
                    let projs = (0..tau)
                        .map(|_| {
                            SketchedProjection::new(b_star, &Sketch::draw(spec, d, rng), rel_tol)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    k = k_tilde(params, &projs);
                }
                acc.push(&sandwich(&k, omega_star));
            }
        }
    }
    Ok(acc.finish(method))
}

/// Exact enumeration when Kaczmarz and `d^τ` fits the budget, else Monte-Carlo.
pub fn auto_gamma_method(
    d: usize,
    tau: Tau,
    spec: &SketchSpec,
    budget: u128,
    mc_samples: usize,
) -> GammaMethod {
    match tau {
        Tau::Exact => GammaMethod::ExactEnum,
        Tau::Steps(n)
            if spec.kind() == SketchKind::Kaczmarz && enumeration_count(d, n) <= budget =>
        {
            GammaMethod::ExactEnum
        }
        Tau::Steps(_) => GammaMethod::MonteCarlo(mc_samples),
    }
}

/// Solves `[(I - K) - ζI] Σ + Σ [(I - K) - ζI] = Γ`, returning `Σ` and the
/// max-entry residual.
pub fn lyapunov_covariance<T: Real>(
    k: &Matrix<T>,
    gamma: &SymMatrix<T>,
    zeta: T,
) -> Result<(SymMatrix<T>, T)> {
    let d = k.rows();
    let r = SymMatrix::from_matrix_symmetrized(&Matrix::identity(d).sub(k)).shifted(-zeta);
    let sigma = kron_lyap_solve(&r, gamma)?;
    let lhs = r.as_matrix().matmul(sigma.as_matrix());
    let resid = lhs.add(&lhs.transpose()).sub(gamma.as_matrix()).max_abs();
    Ok((sigma, resid))
}

/// `ζ = 1{φ = 1} / (2 C_φ)`
pub fn zeta(schedule: &StepSchedule) -> f64 {
    if schedule.phi == 1.0 {
        0.5 / schedule.c_phi
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    pub m_pop: usize,
    pub mc_samples: usize,
    pub enum_budget: u128,
    /// Seed of the oracle's own streams, independent of any replication.
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            m_pop: POPULATION_SAMPLES,
            mc_samples: ORACLE_MC_SAMPLES,
            enum_budget: ENUM_BUDGET,
            seed: 0x0DDC_0FFE,
        }
    }
}

const POPULATION_STREAM: u64 = 10;
const MU_NU_STREAM: u64 = 11;
const MEAN_PROJECTION_STREAM: u64 = 12;
const GAMMA_STREAM: u64 = 13;

#[derive(Clone, Debug)]
pub struct LimitingCovariance<T> {
    pub b_star: SymMatrix<T>,
    pub omega_star: SymMatrix<T>,
    /// `None` for an exact solve.
    pub mu_nu: Option<MuNu<T>>,
    pub params: SolverParams<T>,
    pub k_star: Matrix<T>,
    pub gamma_star: GammaStar<T>,
    pub zeta: T,
    pub sigma_star: SymMatrix<T>,
    pub residual: T,
}

/// `Σ*` for a given `B*` and `Ω*`.
pub fn limiting_from_parts<T: Real>(
    b_star: &SymMatrix<T>,
    omega_star: &SymMatrix<T>,
    sketch: &SketchConfig,
    schedule: &StepSchedule,
    opts: &OracleOptions,
) -> Result<LimitingCovariance<T>> {
    let d = b_star.dim();
    let spec = &sketch.spec;
    let (mu_nu, params) = match sketch.tau {
        Tau::Exact => (None, SolverParams::exact_solve()),
        Tau::Steps(_) => {
            let mn = match spec.kind() {
                SketchKind::Kaczmarz => mu_nu_exact_kaczmarz(b_star)?,
                SketchKind::Gaussian => mu_nu_mc(
                    b_star,
                    spec,
                    opts.mc_samples,
                    &mut RngStream::substream(opts.seed, MU_NU_STREAM),
                )?,
            };
            (
                Some(mn),
                params_from_mu_nu(mn, sketch.tau, sketch.gamma_mode),
            )
        }
    };
    let k_star = match (sketch.tau, spec.kind()) {
        (Tau::Exact, _) => Matrix::zeros(d, d),
        (_, SketchKind::Kaczmarz) => expected_k_kaczmarz(b_star, &params),
        (_, SketchKind::Gaussian) => {
            let mut rng = RngStream::substream(opts.seed, MEAN_PROJECTION_STREAM);
            let z = expected_projection_mc(b_star, spec, opts.mc_samples, &mut rng)?;
            expected_k_from_mean(&z, &params)
        }
    };
    let method = auto_gamma_method(d, sketch.tau, spec, opts.enum_budget, opts.mc_samples);
    let mut rng = RngStream::substream(opts.seed, GAMMA_STREAM);
    let gamma = gamma_star_with_budget(
        b_star,
        omega_star,
        &params,
        spec,
        method,
        opts.enum_budget,
        &mut rng,
    )?;
    let zeta = T::of(zeta(schedule));
    let (sigma_star, residual) = lyapunov_covariance(&k_star, &gamma.value, zeta)?;
    Ok(LimitingCovariance {
        b_star: b_star.clone(),
        omega_star: omega_star.clone(),
        mu_nu,
        params,
        k_star,
        gamma_star: gamma,
        zeta,
        sigma_star,
        residual,
    })
}

/// `Σ*` for a synthetic model, with `B*` and `Ω*` from [`population_quantities`].
pub fn limiting_covariance<T: Real>(
    model: ModelKind,
    gt: &GroundTruth<T>,
    sketch: &SketchConfig,
    schedule: &StepSchedule,
    opts: &OracleOptions,
) -> Result<LimitingCovariance<T>> {
    let mut rng = RngStream::substream(opts.seed, POPULATION_STREAM);
    let (b_star, omega_star) = population_quantities(model, gt, opts.m_pop, &mut rng)?;
    limiting_from_parts(&b_star, &omega_star, sketch, schedule, opts)
}

/// Covariance of unaccelerated sketched Newton, built directly from the
/// products `C̃ = Π_j (I - Z̃_j)` over all Kaczmarz sequences:
/// `[(I - E C̃) - ζI] Σ + Σ [(I - E C̃) - ζI] = E[(I - C̃) Ω (I - C̃)ᵀ]`.
#[derive(Clone, Debug)]
pub struct UnacceleratedCovariance<T> {
    pub c_star: Matrix<T>,
    pub g_star: SymMatrix<T>,
    pub sigma_star: SymMatrix<T>,
}

pub fn unaccelerated_covariance<T: Real>(
    b_star: &SymMatrix<T>,
    omega_star: &SymMatrix<T>,
    tau: usize,
    zeta: T,
    budget: u128,
) -> Result<UnacceleratedCovariance<T>> {
    let d = b_star.dim();
    let i_minus_z: Vec<Matrix<T>> = kaczmarz_projections(b_star)?
        .iter()
        .map(|p| Matrix::identity(d).sub(p.dense().as_matrix()))
        .collect();
    let w = T::of(enumeration_count(d, tau) as f64).recip();
    let mut c_star = Matrix::zeros(d, d);
    let mut g_sum = SymMatrix::zeros(d);
    let step = |prod: &Matrix<T>, i: usize| i_minus_z[i].matmul(prod);
    enumerate(
        d,
        tau,
        budget,
        Matrix::identity(d),
        &step,
        &mut |c: &Matrix<T>| {
            c_star.add_scaled(w, c);
            g_sum.add_scaled(w, &sandwich(c, omega_star));
        },
    )?;
    let (sigma_star, _) = lyapunov_covariance(&c_star, &g_sum, zeta)?;
    Ok(UnacceleratedCovariance {
        c_star,
        g_star: g_sum,
        sigma_star,
    })
}

/// The scalar dynamics of the mean operator along an eigendirection of `Z`
/// with eigenvalue `z`: `G(z) = A - z B` and `p_τ(z) = e₁ᵀ G(z)^τ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoly<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Real> SpectralPoly<T> {
    pub fn new(params: &SolverParams<T>) -> Self {
        Self {
            alpha: params.alpha,
            beta: params.beta,
            gamma: params.gamma,
        }
    }

    pub fn g_matrix(&self, z: T) -> [[T; 2]; 2] {
        let (a, b, g) = (self.alpha, self.beta, self.gamma);
        let one = T::one();
        [
            [(one - a) * (one - z), a * (one - z)],
            [(one - a) * (one - b - g * z), a + b - a * b - a * g * z],
        ]
    }

    /// `Tr(z) = 1 + β - αβ - z(1 - α + αγ)`
    pub fn trace(&self, z: T) -> T {
        let (a, b, g) = (self.alpha, self.beta, self.gamma);
        T::one() + b - a * b - z * (T::one() - a + a * g)
    }

    /// `D(z) = (1 - α) β (1 - z)`
    pub fn det(&self, z: T) -> T {
        (T::one() - self.alpha) * self.beta * (T::one() - z)
    }

    /// `p_τ = Tr p_{τ-1} - D p_{τ-2}`, `p_0 = 1`, `p_1 = 1 - z`.
    pub fn p_tau(&self, z: T, tau: usize) -> T {
        let (tr, det) = (self.trace(z), self.det(z));
        let (mut prev, mut cur) = (T::one(), T::one() - z);
        if tau == 0 {
            return prev;
        }
        for _ in 1..tau {
            let next = tr * cur - det * prev;
            prev = cur;
            cur = next;
        }
        cur
    }

    /// `e₁ᵀ G(z)^τ 1` by repeated 2x2 products.
    pub fn p_tau_direct(&self, z: T, tau: usize) -> T {
        let g = self.g_matrix(z);
        let mut v = [T::one(), T::one()];
        for _ in 0..tau {
            v = [
                g[0][0] * v[0] + g[0][1] * v[1],
                g[1][0] * v[0] + g[1][1] * v[1],
            ];
        }
        v[0]
    }

    /// Largest eigenvalue modulus of `G(z)`.
    pub fn spectral_radius(&self, z: T) -> T {
        let (tr, det) = (self.trace(z), self.det(z));
        let disc = tr * tr - T::of(4.0) * det;
        if disc >= T::zero() {
            let s = disc.sqrt();
            ((tr + s).abs()).max((tr - s).abs()) * T::of(0.5)
        } else {
            det.abs().sqrt()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralReport {
    pub sup_p: f64,
    pub p_bound: f64,
    pub max_radius: f64,
    pub radius_bound: f64,
    /// `min(p_bound - sup_p, radius_bound - max_radius)`.
    pub slack: f64,
}

/// Checks `|p_τ(z)| ≤ 2τ(1 - √(μ/ν))^{τ-2}` and `ρ(G(z)) ≤ 1 - √(μ/ν)` on a grid.
pub fn spectral_bound_check<T: Real>(
    params: &SolverParams<T>,
    mn: &MuNu<T>,
    tau: usize,
    grid: &[T],
) -> Result<SpectralReport> {
    let poly = SpectralPoly::new(params);
    let rate = mn.rate().as_f64();
    let p_bound = mn.operator_bound(tau).as_f64();
    let tol = 1e-12;
    let mut report = SpectralReport {
        sup_p: 0.0,
        p_bound,
        max_radius: 0.0,
        radius_bound: rate,
        slack: f64::INFINITY,
    };
    for &z in grid {
        let zf = z.as_f64();
        if zf < mn.mu.as_f64() - tol || zf > 1.0 + tol {
            return Err(Error::config("grid", format!("z = {zf} outside [μ, 1]")));
        }
        let p = poly.p_tau(z, tau).as_f64().abs();
        let rho = poly.spectral_radius(z).as_f64();
        if p > p_bound * (1.0 + tol) + tol {
            return Err(Error::BoundViolated {
                z: zf,
                detail: format!("|p_{tau}(z)| = {p:e} exceeds {p_bound:e}"),
            });
        }
        if rho > rate * (1.0 + 1e-9) + tol {
            return Err(Error::BoundViolated {
                z: zf,
                detail: format!("ρ(G(z)) = {rho:e} exceeds {rate:e}"),
            });
        }
        report.sup_p = report.sup_p.max(p);
        report.max_radius = report.max_radius.max(rho);
        report.slack = report.slack.min(p_bound - p).min(rate - rho);
    }
    Ok(report)
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * T::of(k as f64 / (n - 1) as f64))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::GammaMode;
    use crate::nasketch::{transition_k, TransitionRecord};
    use proptest::prelude::*;

    fn kaczmarz(tau: Tau) -> SketchConfig {
        SketchConfig::kaczmarz(tau)
    }

    fn random_pd(d: usize, rng: &mut RngStream) -> SymMatrix<f64> {
        let a = Matrix::from_fn(d, d, |_, _| rng.standard_normal::<f64>());
        SymMatrix::from_matrix_symmetrized(&a.transpose().matmul(&a)).shifted(0.2)
    }

    #[test]
    fn k_tilde_matches_block_product() {
        let mut rng = RngStream::new(1);
        let b = random_pd(4, &mut rng);
        let params = params_from_mu_nu(
            mu_nu_exact_kaczmarz(&b).unwrap(),
            Tau::Steps(5),
            GammaMode::Estimated,
        );
        let projs: Vec<SketchedProjection<f64>> = (0..5)
            .map(|_| {
                SketchedProjection::new(
                    &b,
                    &Sketch::draw(&SketchSpec::kaczmarz(), 4, &mut rng),
                    1e-12,
                )
                .unwrap()
            })
            .collect();
        let record = TransitionRecord::new(4, projs.iter().map(|p| p.dense()).collect(), params);
        let dense = transition_k(&record);
        assert!(k_tilde(&params, &projs).sub(&dense).max_abs() < 1e-12);
    }

    #[test]
    fn gamma_star_edge_cases() {
        let omega = SymMatrix::<f64>::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        let b = SymMatrix::identity(2);
        let spec = SketchSpec::kaczmarz();
        let mut rng = RngStream::new(0);
        let p0 = SolverParams::unaccelerated(Tau::Steps(0));
        let g = gamma_star(&b, &omega, &p0, &spec, GammaMethod::ExactEnum, &mut rng).unwrap();
        assert_eq!(g.value, SymMatrix::zeros(2));
        let g = gamma_star(
            &b,
            &omega,
            &SolverParams::exact_solve(),
            &spec,
            GammaMethod::ExactEnum,
            &mut rng,
        )
        .unwrap();
        assert_eq!(g.value, omega);

        let b1 = SymMatrix::<f64>::diag(&[3.0]);
        let o1 = SymMatrix::diag(&[1.7]);
        let p = params_from_mu_nu(
            mu_nu_exact_kaczmarz(&b1).unwrap(),
            Tau::Steps(1),
            GammaMode::Estimated,
        );
        let g = gamma_star(&b1, &o1, &p, &spec, GammaMethod::ExactEnum, &mut rng).unwrap();
        assert!((g.value[(0, 0)] - 1.7).abs() < 1e-14);
    }

    #[test]
    fn enumeration_agrees_with_monte_carlo() {
        let b = SymMatrix::<f64>::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let omega = b.inverse_pd().unwrap();
        let p = params_from_mu_nu(MuNu::new(0.5, 2.0).unwrap(), Tau::Steps(2), GammaMode::Unit);
        assert_eq!(p.gamma, 1.0);
        let spec = SketchSpec::kaczmarz();
        let exact = gamma_star(
            &b,
            &omega,
            &p,
            &spec,
            GammaMethod::ExactEnum,
            &mut RngStream::new(0),
        )
        .unwrap();
        let mc = gamma_star(
            &b,
            &omega,
            &p,
            &spec,
            GammaMethod::MonteCarlo(100_000),
            &mut RngStream::new(4),
        )
        .unwrap();
        assert!(exact.std_error.is_none());
        assert!(mc.std_error.unwrap() < 0.01);
        assert!(exact.value.sub(&mc.value).max_abs() < 0.02);
    }

    #[test]
    fn enumeration_budget() {
        let b = SymMatrix::<f64>::identity(10);
        let p = SolverParams::unaccelerated(Tau::Steps(7));
        let err = gamma_star(
            &b,
            &b,
            &p,
            &SketchSpec::kaczmarz(),
            GammaMethod::ExactEnum,
            &mut RngStream::new(0),
        );
        assert!(matches!(
            err,
            Err(Error::EnumTooLarge {
                count: 10_000_000,
                ..
            })
        ));
        let g = SketchSpec::gaussian(1).unwrap();
        assert_eq!(
            auto_gamma_method(10, Tau::Steps(7), &SketchSpec::kaczmarz(), ENUM_BUDGET, 5),
            GammaMethod::MonteCarlo(5)
        );
        assert_eq!(
            auto_gamma_method(10, Tau::Steps(6), &SketchSpec::kaczmarz(), ENUM_BUDGET, 5),
            GammaMethod::ExactEnum
        );
        assert_eq!(
            auto_gamma_method(2, Tau::Steps(2), &g, ENUM_BUDGET, 5),
            GammaMethod::MonteCarlo(5)
        );
    }

    #[test]
    fn degenerate_regimes() {
        let omega = SymMatrix::<f64>::from_rows(&[&[1.5, -0.4], &[-0.4, 0.8]]).unwrap();
        let opts = OracleOptions::default();
        let exact = kaczmarz(Tau::Exact);
        let lc = limiting_from_parts(
            &SymMatrix::identity(2),
            &omega,
            &exact,
            &StepSchedule::default(),
            &opts,
        )
        .unwrap();
        assert!(lc.sigma_star.sub(&omega.scale(0.5)).max_abs() < 1e-10);
        let one = StepSchedule::new(1.0, 1.0).unwrap();
        let lc = limiting_from_parts(&SymMatrix::identity(2), &omega, &exact, &one, &opts).unwrap();
        assert!(lc.sigma_star.sub(&omega).max_abs() < 1e-10);
        let two = StepSchedule::new(2.0, 1.0).unwrap();
        let lc = limiting_from_parts(&SymMatrix::identity(2), &omega, &exact, &two, &opts).unwrap();
        assert!(lc.sigma_star.sub(&omega.scale(2.0 / 3.0)).max_abs() < 1e-10);
    }

    #[test]
    fn unit_gamma_matches_unaccelerated() {
        // B* = I, d = 2: μ = 1/2, ν = 2, so γ = 1.
        let omega = SymMatrix::<f64>::identity(2);
        let lc = limiting_from_parts(
            &omega,
            &omega,
            &kaczmarz(Tau::Steps(2)),
            &StepSchedule::default(),
            &OracleOptions::default(),
        )
        .unwrap();
        assert_eq!(lc.gamma_star.method, GammaMethod::ExactEnum);
        let p = lc.params;
        assert!(
            (p.gamma - 1.0).abs() < 1e-12
                && (p.alpha - 1.0 / 3.0).abs() < 1e-12
                && (p.beta - 0.5).abs() < 1e-12
        );
        let un = unaccelerated_covariance(&omega, &omega, 2, 0.0, ENUM_BUDGET).unwrap();
        assert!(lc.sigma_star.sub(&un.sigma_star).max_abs() < 1e-8);
        assert!(lc.k_star.sub(&un.c_star).max_abs() < 1e-12);
    }

    #[test]
    fn linear_identity_oracle() {
        let gt = GroundTruth::<f64>::linspace(
            &crate::models::DesignSpec {
                kind: crate::models::DesignKind::Identity,
                r: 0.0,
                dim: 5,
            },
            1.0,
        )
        .unwrap();
        let lc = limiting_covariance(
            ModelKind::Linear,
            &gt,
            &kaczmarz(Tau::Steps(5)),
            &StepSchedule::default(),
            &OracleOptions::default(),
        )
        .unwrap();
        assert!(lc.residual <= 1e-8 * (1.0 + lc.gamma_star.value.max_abs()));
        assert!(lc.sigma_star.lambda_min().unwrap() >= -1e-12);
        // Sketching can only inflate the variance relative to an exact solve.
        assert!(lc.sigma_star.trace() >= 0.5 * lc.omega_star.trace() - 1e-10);
        // B* = I: every K̃ is a polynomial in coordinate projections, K* = κ I.
        let kappa = lc.k_star[(0, 0)];
        assert!(lc.k_star.sub(&Matrix::identity(5).scale(kappa)).max_abs() < 1e-12);
        assert!(kappa > 0.0 && kappa < 1.0);
    }

    #[test]
    fn spectral_poly_examples() {
        let p = SolverParams::<f64>::new(0.2, 0.75, 1.0, Tau::Steps(5));
        let poly = SpectralPoly::new(&p);
        for z in [0.25, 0.5, 1.0] {
            assert_eq!(poly.p_tau(z, 0), 1.0);
            assert_eq!(poly.p_tau(z, 1), 1.0 - z);
        }
        for tau in 1..8 {
            assert_eq!(poly.p_tau(1.0, tau), 0.0);
        }
        let g = poly.g_matrix(0.4);
        let tr = g[0][0] + g[1][1];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        assert!((tr - poly.trace(0.4)).abs() < 1e-15 && (det - poly.det(0.4)).abs() < 1e-15);
    }

    #[test]
    fn spectral_bound_examples() {
        let mn = MuNu::new(0.25, 4.0).unwrap();
        let p = params_from_mu_nu(mn, Tau::Steps(5), GammaMode::Estimated);
        let grid = linspace(0.25, 1.0, 101);
        let r = spectral_bound_check(&p, &mn, 5, &grid).unwrap();
        assert!(r.slack >= 0.0);
        assert!(spectral_bound_check(&p, &mn, 2, &grid).is_ok());
        assert!(matches!(
            spectral_bound_check(&p, &mn, 0, &grid),
            Err(Error::BoundViolated { .. })
        ));
        assert!(spectral_bound_check(&p, &mn, 5, &[0.1]).is_err());

        let mn = MuNu::new(1.0, 1.0).unwrap();
        let p = params_from_mu_nu(mn, Tau::Steps(3), GammaMode::Estimated);
        let poly = SpectralPoly::new(&p);
        assert_eq!(poly.spectral_radius(1.0), 0.0);
        assert_eq!(poly.p_tau(1.0, 3), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn recursion_matches_direct_power(mu in 0.02f64..1.0, frac in 0.0f64..1.0, tau in 0usize..13, unit in any::<bool>()) {
            let nu = 1.0 + frac * (1.0 / mu - 1.0);
            let mn = MuNu::new(mu, nu).unwrap();
            let mode = if unit { GammaMode::Unit } else { GammaMode::Estimated };
            let p = params_from_mu_nu(mn, Tau::Steps(tau), mode);
            let poly = SpectralPoly::new(&p);
            for z in linspace(mu, 1.0, 101) {
                prop_assert!((poly.p_tau(z, tau) - poly.p_tau_direct(z, tau)).abs() <= 1e-12);
            }
        }

        #[test]
        fn lyapunov_residual_on_random_oracles(seed in 0u64..1000, d in 2usize..5, tau in 1usize..4) {
            let mut rng = RngStream::new(seed);
            let b = random_pd(d, &mut rng);
            let omega = b.inverse_pd().unwrap();
            let lc = limiting_from_parts(&b, &omega, &kaczmarz(Tau::Steps(tau)), &StepSchedule::default(), &OracleOptions::default()).unwrap();
            prop_assert!(lc.residual <= 1e-8 * (1.0 + lc.gamma_star.value.max_abs()));
            prop_assert!(lc.sigma_star.lambda_min().unwrap() >= -1e-10);
        }
    }
}
