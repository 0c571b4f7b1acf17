//! The online Newton driver.
//!
//! Each step draws one sample `ξ_t`, evaluates `g_t` and `H_t` at `x_t`,
//! approximately solves `B_t Δx = -g_t` with the accelerated sketch solver and
//! moves `x_{t+1} = x_t + φ_t z_τ`. `B_t` averages `H_0..H_{t-1}`, so the
//! curvature of the current sample enters only from the next step on.

use serde::{Deserialize, Serialize};

use crate::accel::{
    mu_nu_exact_kaczmarz, mu_nu_mc, params_from_mu_nu, GammaMode, SolverParams, Tau,
};
use crate::error::{Error, Result};
use crate::inference::RunningCovariance;
use crate::linalg::{sym_eigen, Cholesky, SymMatrix};
use crate::models::{derivative_factors, draw_sample, GroundTruth, ModelKind, Sample};
use crate::nasketch::solve_unrecorded;
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::sketching::{SketchKind, SketchSpec};

/// Floor on `λ_min(B_t)` for the matrix handed to the inner solver.
pub const RIDGE_DELTA: f64 = 1e-6;

/// Substream ids within one replication's seed.
pub const DATA_STREAM: u64 = 0;
pub const SKETCH_STREAM: u64 = 1;
pub const MU_NU_STREAM: u64 = 2;

/// `φ_t = c_phi / (t+1)^phi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub c_phi: f64,
    pub phi: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            c_phi: 1.0,
            phi: 0.501,
        }
    }
}

impl StepSchedule {
    pub fn new(c_phi: f64, phi: f64) -> Result<Self> {
        if !(c_phi > 0.0 && c_phi.is_finite()) {
            return Err(Error::config("c_phi", format!("{c_phi} must be positive")));
        }
        if !(phi > 0.5 && phi <= 1.0) {
            return Err(Error::config("phi", format!("{phi} outside (0.5, 1]")));
        }
        Ok(Self { c_phi, phi })
    }

    pub fn at(&self, t: u64) -> f64 {
        self.c_phi / ((t + 1) as f64).powf(self.phi)
    }
}

/// How `(μ, ν)` are obtained from `B_t` when the solver parameters refresh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MuNuMethod {
    /// Closed-form enumeration (Kaczmarz only).
    Exact,
    /// Monte-Carlo with the given number of sketch draws.
    MonteCarlo(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SketchConfig {
    pub spec: SketchSpec,
    pub tau: Tau,
    pub gamma_mode: GammaMode,
    pub mu_nu: MuNuMethod,
    /// Recompute `(α, β, γ)` from the current `B_t` every this many steps.
    pub refresh_every: u64,
}

impl SketchConfig {
    pub fn kaczmarz(tau: Tau) -> Self {
        Self {
            spec: SketchSpec::kaczmarz(),
            tau,
            gamma_mode: GammaMode::Estimated,
            mu_nu: MuNuMethod::Exact,
            refresh_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.refresh_every == 0 {
            return Err(Error::config("refresh_every", "must be at least 1"));
        }
        match self.mu_nu {
            MuNuMethod::Exact if self.spec.kind() != SketchKind::Kaczmarz => Err(Error::config(
                "mu_nu",
                "exact (μ, ν) needs Kaczmarz sketching; use mc",
            )),
            MuNuMethod::MonteCarlo(m) if m < 2 => {
                Err(Error::config("mc_samples_mu_nu", "need at least two draws"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub model: ModelKind,
    pub schedule: StepSchedule,
    pub sketch: SketchConfig,
}

/// `B_t = (1 - 1/t) B_{t-1} + H_{t-1}/t`.
pub fn hessian_avg_update<T: Real>(
    b_prev: &SymMatrix<T>,
    h_new: &SymMatrix<T>,
    t: u64,
) -> Result<SymMatrix<T>> {
    if t == 0 {
        return Err(Error::InvalidStep(
            "Hessian average is defined for t ≥ 1".into(),
        ));
    }
    let w = T::of(t as f64).recip();
    let mut b = b_prev.scale(T::one() - w);
    b.add_scaled(w, h_new);
    Ok(b)
}

/// `B + (δ - λ_min) I` when `λ_min(B) < δ`, otherwise `None`.
pub fn ridge_repair<T: Real>(b: &SymMatrix<T>, delta: T) -> Result<Option<SymMatrix<T>>> {
    if Cholesky::factor(&b.shifted(-delta)).is_ok() {
        return Ok(None);
    }
    let lmin = b.lambda_min()?;
    if lmin >= delta {
        return Ok(None);
    }
    Ok(Some(b.shifted(delta - lmin)))
}

/// Exact step on a nearly singular `B_t`: inverts only eigenvalues `≥ δ`.
///
/// A direct solve against the ridged matrix divides the part of `rhs` outside
/// the range of a rank-deficient `B_t` by `δ`. Sketch-and-project never moves
/// outside `range(B_t)`, so this is the exact-solve counterpart.
pub fn range_step<T: Real>(b: &SymMatrix<T>, rhs: &[T], delta: T) -> Result<Vec<T>> {
    let pinv = sym_eigen(b)?.map_values(|l| if l >= delta { l.recip() } else { T::zero() });
    Ok(pinv.mul_vec(rhs))
}

#[derive(Clone, Debug)]
pub struct NewtonState<T> {
    pub x: Vec<T>,
    /// Hessian average over the samples seen so far (`I` before any).
    pub b: SymMatrix<T>,
    pub t: u64,
    pub params: Option<SolverParams<T>>,
    /// Steps whose solve used a ridge-repaired `B_t`.
    pub ridge_steps: u64,
    /// Refreshes that fell back to unaccelerated parameters.
    pub param_fallbacks: u64,
}

impl<T: Real> NewtonState<T> {
    /// `x_0 = 0`, `B_0 = I`.
    pub fn new(d: usize) -> Self {
        Self::from_point(vec![T::zero(); d])
    }

    pub fn from_point(x: Vec<T>) -> Self {
        let d = x.len();
        Self {
            x,
            b: SymMatrix::identity(d),
            t: 0,
            params: None,
            ridge_steps: 0,
            param_fallbacks: 0,
        }
    }
}

/// Solver parameters for `b`. A degenerate `E[Z̃]` falls back to plain
/// sketch-and-project, which needs no `(μ, ν)`.
fn refresh_params<T: Real>(
    b: &SymMatrix<T>,
    sketch: &SketchConfig,
    rng: &mut RngStream,
) -> Result<(SolverParams<T>, bool)> {
    let mn = match sketch.mu_nu {
        MuNuMethod::Exact => mu_nu_exact_kaczmarz(b),
        MuNuMethod::MonteCarlo(m) => mu_nu_mc(b, &sketch.spec, m, rng),
    };
    match mn {
        Ok(mn) => Ok((params_from_mu_nu(mn, sketch.tau, sketch.gamma_mode), false)),
        Err(Error::DegenerateSketchDistribution(_)) => {
            Ok((SolverParams::unaccelerated(sketch.tau), true))
        }
        Err(e) => Err(e),
    }
}

/// RNG streams of one trajectory.
#[derive(Clone, Debug)]
pub struct StepStreams {
    pub data: RngStream,
    pub sketch: RngStream,
    pub mu_nu: RngStream,
}

impl StepStreams {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            data: RngStream::substream(seed, DATA_STREAM),
            sketch: RngStream::substream(seed, SKETCH_STREAM),
            mu_nu: RngStream::substream(seed, MU_NU_STREAM),
        }
    }
}

/// One Newton step on a given sample. Returns the stepsize `φ_t` used.
pub fn newton_step_with_sample<T: Real>(
    state: &mut NewtonState<T>,
    sample: &Sample<T>,
    cfg: &NewtonConfig,
    streams: &mut StepStreams,
) -> Result<T> {
    let (gcoef, hcoef) = derivative_factors(cfg.model, &state.x, sample);
    let rhs: Vec<T> = sample.features.iter().map(|&a| -gcoef * a).collect();

    let repaired = ridge_repair(&state.b, T::of(RIDGE_DELTA))?;
    if repaired.is_some() {
        state.ridge_steps += 1;
    }
    let b_solve = repaired.as_ref().unwrap_or(&state.b);

    let params = match cfg.sketch.tau {
        Tau::Exact => SolverParams::exact_solve(),
        Tau::Steps(_) => {
            let every = cfg.sketch.refresh_every;
            // Early on B_t moves fast, so also refresh at powers of two.
            let due =
                state.t.is_multiple_of(every) || (state.t < every && state.t.is_power_of_two());
            if state.params.is_none() || due {
                let (p, fallback) = refresh_params(b_solve, &cfg.sketch, &mut streams.mu_nu)?;
                state.param_fallbacks += u64::from(fallback);
                state.params = Some(p);
            }
            state.params.expect("set above")
        }
    };
    let z = if matches!(cfg.sketch.tau, Tau::Exact) && repaired.is_some() {
        range_step(&state.b, &rhs, T::of(RIDGE_DELTA))?
    } else {
        solve_unrecorded(
            b_solve,
            &rhs,
            &params,
            &cfg.sketch.spec,
            &mut streams.sketch,
        )?
    };

    let phi_t = T::of(cfg.schedule.at(state.t));
    for (xi, zi) in state.x.iter_mut().zip(&z) {
        *xi += phi_t * *zi;
    }
    let next = state.t + 1;
    let w = T::of(next as f64).recip();
    state.b.scale_in_place(T::one() - w);
    state.b.add_outer(w * hcoef, &sample.features);
    state.t = next;
    Ok(phi_t)
}

/// Draws `ξ_t` from the data stream and takes one step.
pub fn newton_step<T: Real>(
    state: &mut NewtonState<T>,
    gt: &GroundTruth<T>,
    cfg: &NewtonConfig,
    streams: &mut StepStreams,
) -> Result<T> {
    let sample = draw_sample(cfg.model, gt, &mut streams.data);
    newton_step_with_sample(state, &sample, cfg, streams)
}

/// Snapshot of a trajectory after `t` steps.
#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub t: u64,
    pub x: Vec<T>,
    /// `φ_t`, the stepsize paired with `Σ̂_t` in the interval half-width.
    pub phi_t: T,
    pub sigma_hat: SymMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub checkpoints: Vec<Checkpoint<T>>,
    pub final_state: NewtonState<T>,
    pub covariance: RunningCovariance<T>,
}

/// Geometric checkpoint set `{⌈T/2^k⌉ : k = 0..levels}`, ascending, deduplicated.
pub fn geometric_checkpoints(steps: u64, levels: u32) -> Vec<u64> {
    let mut out: Vec<u64> = (0..=levels)
        .map(|k| steps.div_ceil(1u64 << k.min(63)))
        .filter(|&t| t >= 1)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Inference warm-up: iterates `x_1..x_{n₀}` are not fed to `Σ̂`. With
/// rank-one sample Hessians the first few `B_t` are singular or badly
/// conditioned, and the resulting early excursions would otherwise sit in
/// the `1/t` average for the whole run.
pub const DEFAULT_WARMUP: u64 = 500;

/// Runs `steps` Newton steps from `x_0 = 0`, feeding iterates
/// `x_{warmup+1}..x_T` to the covariance estimator and recording the
/// checkpoints, which must come after the warm-up.
pub fn run_trajectory<T: Real>(
    gt: &GroundTruth<T>,
    cfg: &NewtonConfig,
    steps: u64,
    checkpoints: &[u64],
    warmup: u64,
    seed: u64,
) -> Result<Trajectory<T>> {
    cfg.sketch.validate()?;
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("checkpoints", "must be strictly increasing"));
    }
    if let Some(&last) = checkpoints.last() {
        if last > steps || checkpoints[0] <= warmup {
            return Err(Error::config(
                "checkpoints",
                format!("must lie in [{}, {steps}]", warmup + 1),
            ));
        }
    }
    let d = gt.dim();
    let mut state = NewtonState::new(d);
    let mut streams = StepStreams::from_seed(seed);
    let mut cov = RunningCovariance::new(d);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next_cp = checkpoints.iter().peekable();
    while state.t < steps {
        let phi_prev = newton_step(&mut state, gt, cfg, &mut streams)?;
        if state.t > warmup {
            cov.push(&state.x, phi_prev)?;
        }
        if next_cp.peek() == Some(&&state.t) {
            next_cp.next();
            out.push(Checkpoint {
                t: state.t,
                x: state.x.clone(),
                phi_t: T::of(cfg.schedule.at(state.t)),
                sigma_hat: cov.materialize()?,
            });
        }
    }
    Ok(Trajectory {
        checkpoints: out,
        final_state: state,
        covariance: cov,
    })
}
