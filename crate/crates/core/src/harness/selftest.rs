//! Fast invariant checks behind the `selftest` subcommand.

use crate::accel::{mu_nu_exact_kaczmarz, params_from_mu_nu, GammaMode, SolverParams, Tau};
use crate::error::Result;
use crate::inference::RunningCovariance;
use crate::linalg::{cholesky_solve, Matrix, SymMatrix};
use crate::nasketch::{solve_with_sketches, transition_k};
use crate::oracle::{linspace, lyapunov_covariance, spectral_bound_check, SpectralPoly};
use crate::rng::RngStream;
use crate::sketching::{Sketch, SketchSpec, SketchedProjection};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_pd(d: usize, rng: &mut RngStream) -> SymMatrix<f64> {
    let a = Matrix::from_fn(d, d, |_, _| rng.standard_normal::<f64>());
    SymMatrix::from_matrix_symmetrized(&a.transpose().matmul(&a)).shifted(0.3)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("worst {worst:.3e}, tolerance {tol:.0e}"),
    }
}

/// `z_τ = (I − K̃)Δx` on random instances.
fn operator_representation(rng: &mut RngStream) -> Result<Check> {
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let d = 2 + trial % 5;
        let tau = 1 + trial % 6;
        let b = random_pd(d, rng);
        let g = rng.normal_vec::<f64>(d);
        let params = params_from_mu_nu(
            mu_nu_exact_kaczmarz(&b)?,
            Tau::Steps(tau),
            GammaMode::Estimated,
        );
        let sketches: Vec<Sketch<f64>> = (0..tau)
            .map(|_| Sketch::draw(&SketchSpec::kaczmarz(), d, rng))
            .collect();
        let (z, record) = solve_with_sketches(&b, &g, &params, &sketches)?;
        let dx = cholesky_solve(&b, &g)?;
        let k = transition_k(&record);
        let pred = Matrix::identity(d).sub(&k).mul_vec(&dx);
        worst = worst.max(rel_err(&z, &pred));
    }
    Ok(check("operator representation", worst, 1e-10))
}

/// `(α, β, γ) = (1/2, 0, 1)` is plain sketch-and-project.
fn unaccelerated_reduction(rng: &mut RngStream) -> Result<Check> {
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let d = 2 + trial % 5;
        let b = random_pd(d, rng);
        let g = rng.normal_vec::<f64>(d);
        let sketches: Vec<Sketch<f64>> = (0..6)
            .map(|_| Sketch::draw(&SketchSpec::kaczmarz(), d, rng))
            .collect();
        let params = SolverParams::new(0.5, 0.0, 1.0, Tau::Steps(sketches.len()));
        let (z, _) = solve_with_sketches(&b, &g, &params, &sketches)?;
        let mut plain = vec![0.0; d];
        for s in &sketches {
            let p = SketchedProjection::new(&b, s, 1e-12)?;
            let r: Vec<f64> = b
                .mul_vec(&plain)
                .iter()
                .zip(&g)
                .map(|(a, c)| a - c)
                .collect();
            for (zi, di) in plain.iter_mut().zip(p.direction(&r)) {
                *zi -= di;
            }
        }
        worst = worst.max(rel_err(&z, &plain));
    }
    Ok(check("unaccelerated reduction", worst, 1e-12))
}

/// Online `Σ̂_t` against the two-pass weighted formula.
fn estimator_equivalence(rng: &mut RngStream) -> Result<Check> {
    let (d, n) = (4, 300);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec::<f64>(d)).collect();
    let phis: Vec<f64> = (0..n).map(|i| 1.0 / ((i + 1) as f64).powf(0.6)).collect();
    let mut online = RunningCovariance::new(d);
    for (x, &p) in xs.iter().zip(&phis) {
        online.push(x, p)?;
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n as f64)
        .collect();
    let mut batch = SymMatrix::zeros(d);
    for (x, &p) in xs.iter().zip(&phis) {
        let c: Vec<f64> = x.iter().zip(&mean).map(|(a, m)| a - m).collect();
        batch.add_outer(1.0 / (p * n as f64), &c);
    }
    let worst = online.materialize()?.sub(&batch).max_abs() / batch.max_abs();
    Ok(check("covariance estimator equivalence", worst, 1e-9))
}

/// Recursion against direct powering, and the `2τ·rate^(τ−2)` envelope.
fn spectral_recursion(rng: &mut RngStream) -> Result<Check> {
    let mut worst = 0.0f64;
    let b = random_pd(5, rng);
    let mn = mu_nu_exact_kaczmarz(&b)?;
    for tau in 1..=12 {
        let params = params_from_mu_nu(mn, Tau::Steps(tau), GammaMode::Estimated);
        let poly = SpectralPoly::new(&params);
        let grid = linspace(mn.mu, 1.0, 101);
        for &z in &grid {
            worst = worst.max((poly.p_tau(z, tau) - poly.p_tau_direct(z, tau)).abs());
        }
        if tau >= 2 {
            if let Err(e) = spectral_bound_check(&params, &mn, tau, &grid) {
                return Ok(Check {
                    name: "spectral recursion",
                    passed: false,
                    detail: e.to_string(),
                });
            }
        }
    }
    Ok(check("spectral recursion", worst, 1e-12))
}

/// `K = 0`, `ζ = 0` gives `Σ = Ω/2`.
fn lyapunov_degenerate(rng: &mut RngStream) -> Result<Check> {
    let omega = random_pd(4, rng);
    let (sigma, _) = lyapunov_covariance(&Matrix::zeros(4, 4), &omega, 0.0)?;
    Ok(check(
        "Lyapunov K = 0",
        sigma.sub(&omega.scale(0.5)).max_abs(),
        1e-10,
    ))
}

pub fn run_selftest(seed: u64) -> Result<Vec<Check>> {
    let mut rng = RngStream::new(seed);
    Ok(vec![
        operator_representation(&mut rng)?,
        unaccelerated_reduction(&mut rng)?,
        estimator_equivalence(&mut rng)?,
        spectral_recursion(&mut rng)?,
        lyapunov_degenerate(&mut rng)?,
    ])
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_selftest(7).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
