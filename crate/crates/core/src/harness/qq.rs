//! Standardized terminal statistics against `N(0, 1)`.

use std::io::Write;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::inference::normal_quantile;
use crate::linalg::SymMatrix;

pub const QQ_FILE: &str = "qq.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct QqReport {
    /// `(theoretical, empirical)` pairs, empirical ascending.
    pub points: Vec<(f64, f64)>,
    pub ks: f64,
}

impl QqReport {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest vertical gap between two point sets of equal size.
    pub fn max_gap(&self, other: &QqReport) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} QQ points",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a.1 - b.1).abs())
            .fold(0.0, f64::max))
    }
}

/// `u_k = (wᵀx_k − wᵀx*) / √(φ_T wᵀΣ*w)`
pub fn standardize(
    w: &[f64],
    x_star: &[f64],
    sigma_star: &SymMatrix<f64>,
    phi_t: f64,
    terminals: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    if w.len() != x_star.len() || w.len() != sigma_star.dim() {
        return Err(Error::DimensionMismatch(format!(
            "w: {}, x*: {}, Σ*: {}",
            w.len(),
            x_star.len(),
            sigma_star.dim()
        )));
    }
    let scale = (phi_t * sigma_star.quad_form(w)).sqrt();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::OracleUnavailable(format!(
            "wᵀΣ*w gives scale {scale}"
        )));
    }
    let truth = dot(w, x_star);
    terminals
        .iter()
        .map(|x| {
            if x.len() != w.len() {
                return Err(Error::DimensionMismatch(format!(
                    "iterate has {} entries",
                    x.len()
                )));
            }
            Ok((dot(w, x) - truth) / scale)
        })
        .collect()
}

/// One-sample Kolmogorov–Smirnov distance to `N(0, 1)`.
pub fn ks_statistic(u: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Sorted `u` against `Φ⁻¹((k − 0.5)/R)`.
pub fn qq_report(u: &[f64]) -> Result<QqReport> {
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let points = s
        .iter()
        .enumerate()
        .map(|(k, &e)| Ok((normal_quantile((k as f64 + 0.5) / n)?, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(QqReport {
        points,
        ks: ks_statistic(u),
    })
}

/// Standardizes against the oracle `Σ*` and writes `qq.csv` into `dir` when given.
pub fn emit_qq(
    sigma_star: Option<&SymMatrix<f64>>,
    w: &[f64],
    x_star: &[f64],
    phi_t: f64,
    terminals: &[Vec<f64>],
    dir: Option<&Path>,
) -> Result<QqReport> {
    let sigma = sigma_star
        .ok_or_else(|| Error::OracleUnavailable("no Σ* for this configuration".into()))?;
    let report = qq_report(&standardize(w, x_star, sigma, phi_t, terminals)?)?;
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_qq(&dir.join(QQ_FILE), &report)?;
    }
    Ok(report)
}

pub fn write_qq(path: &Path, report: &QqReport) -> Result<()> {
    let mut out = String::from("theoretical,empirical\n");
    for (t, e) in &report.points {
        out.push_str(&format!("{t:.17e},{e:.17e}\n"));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn ks_of_exact_quantiles_is_half_step() {
        let r = 200;
        let u: Vec<f64> = (0..r)
            .map(|k| normal_quantile((k as f64 + 0.5) / r as f64).unwrap())
            .collect();
        assert!((ks_statistic(&u) - 0.5 / r as f64).abs() < 1e-9);
    }

    #[test]
    fn shifted_sample_is_detected() {
        let mut rng = RngStream::new(4);
        let u: Vec<f64> = (0..200)
            .map(|_| rng.standard_normal::<f64>() + 1.0)
            .collect();
        assert!(ks_statistic(&u) > 0.25);
    }

    #[test]
    fn missing_oracle() {
        let err = emit_qq(None, &[1.0], &[0.0], 0.1, &[vec![0.0]], None).unwrap_err();
        assert!(matches!(err, Error::OracleUnavailable(_)));
    }

    #[test]
    fn standardization_and_file() {
        let sigma = SymMatrix::<f64>::identity(2).scale(4.0);
        let w = [0.5, 0.5];
        // wᵀΣw = 2, φ = 0.5, scale 1
        let u = standardize(
            &w,
            &[1.0, 1.0],
            &sigma,
            0.5,
            &[vec![3.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        assert_eq!(u, vec![1.0, 0.0]);
        let dir = tempfile::tempdir().unwrap();
        let rep = emit_qq(
            Some(&sigma),
            &w,
            &[1.0, 1.0],
            0.5,
            &[vec![3.0, 1.0], vec![1.0, 1.0]],
            Some(dir.path()),
        )
        .unwrap();
        assert_eq!(rep.points[0].1, 0.0);
        let text = std::fs::read_to_string(dir.path().join(QQ_FILE)).unwrap();
        assert!(text.starts_with("theoretical,empirical\n"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(rep.max_gap(&rep).unwrap(), 0.0);
    }
}
