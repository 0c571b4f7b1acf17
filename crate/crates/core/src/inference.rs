//! Online weighted covariance of the iterates and the confidence intervals
//! built from it.
//!
//! With weights `1/φ_{i-1}` on the iterates `x_1..x_t`,
//!
//! ```text
//! Σ̂_t = (1/t) Σ_i (x_i - x̄)(x_i - x̄)ᵀ / φ_{i-1}
//!     = (1/t) [A - b x̄ᵀ - x̄ bᵀ + c x̄ x̄ᵀ]
//! ```
//!
//! where `A`, `b`, `c` are running sums and `x̄ = s/t`. Nothing is inverted.

use crate::error::{Error, Result};
use crate::linalg::{dot, SymMatrix};
use crate::scalar::Real;

/// Running sums behind `Σ̂_t`.
///
/// Sums are taken over `x_i - x_1` rather than `x_i`. The estimator is
/// shift-invariant, and centring on the first point keeps the cancellation in
/// `A - b x̄ᵀ - ...` small when the iterates sit far from the origin.
#[derive(Clone, Debug)]
pub struct RunningCovariance<T> {
    dim: usize,
    count: u64,
    origin: Vec<T>,
    a: SymMatrix<T>,
    b: Vec<T>,
    c: T,
    s: Vec<T>,
}

impl<T: Real> RunningCovariance<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            origin: Vec::new(),
            a: SymMatrix::zeros(dim),
            b: vec![T::zero(); dim],
            c: T::zero(),
            s: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Adds `x_i` with weight `1/phi_prev`, where `phi_prev` is the stepsize
    /// that produced it.
    pub fn push(&mut self, x: &[T], phi_prev: T) -> Result<()> {
        if !(phi_prev > T::zero()) || !phi_prev.is_finite() {
            return Err(Error::InvalidStep(format!(
                "stepsize {phi_prev} must be positive"
            )));
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "iterate has {} entries, estimator has {}",
                x.len(),
                self.dim
            )));
        }
        if self.count == 0 {
            self.origin = x.to_vec();
        }
        let y: Vec<T> = x
            .iter()
            .zip(&self.origin)
            .map(|(&xi, &oi)| xi - oi)
            .collect();
        let w = phi_prev.recip();
        self.a.add_outer(w, &y);
        for ((bi, si), &yi) in self.b.iter_mut().zip(self.s.iter_mut()).zip(&y) {
            *bi += w * yi;
            *si += yi;
        }
        self.c += w;
        self.count += 1;
        Ok(())
    }

    pub fn materialize(&self) -> Result<SymMatrix<T>> {
        if self.count == 0 {
            return Err(Error::EmptyEstimator);
        }
        let t = T::of(self.count as f64);
        let mean: Vec<T> = self.s.iter().map(|&v| v / t).collect();
        let mut m = self.a.as_matrix().clone();
        m.add_outer(-T::one(), &self.b, &mean);
        m.add_outer(-T::one(), &mean, &self.b);
        m.add_outer(self.c, &mean, &mean);
        Ok(SymMatrix::from_matrix_symmetrized(&m).scale(t.recip()))
    }

    /// Mean of the pushed iterates.
    pub fn mean(&self) -> Option<Vec<T>> {
        if self.count == 0 {
            return None;
        }
        let t = T::of(self.count as f64);
        Some(
            self.s
                .iter()
                .zip(&self.origin)
                .map(|(&s, &o)| o + s / t)
                .collect(),
        )
    }
}

/// Inverse standard normal CDF (Wichura's AS 241, about 1e-16 relative).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2509.080_928_730_122_7 * r + 33_430.575_583_588_13) * r
            + 67265.770_927_008_7)
            * r
            + 45921.953_931_549_87)
            * r
            + 13_731.693_765_509_46)
            * r
            + 1971.590_950_306_551_3)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r
            + 39307.895_800_092_71)
            * r
            + 21213.794_301_586_597)
            * r
            + 5394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return Ok(num / den);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_08)
            * r
            + 0.689_767_334_985_100_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_888)
            * r
            + 1.0;
        num / den
    };
    Ok(if q < 0.0 { -val } else { val })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub half_width: f64,
    /// Nominal coverage `1 - q`.
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo() <= v && v <= self.hi()
    }
}

/// `wᵀx_t ± z_{1-q/2} √(φ_t wᵀΣ̂w)`. Negative quadratic forms from round-off
/// are clamped to zero.
pub fn confidence_interval<T: Real>(
    w: &[T],
    x_t: &[T],
    sigma_hat: &SymMatrix<T>,
    phi_t: T,
    q: f64,
) -> Result<ConfidenceInterval> {
    if w.len() != x_t.len() || w.len() != sigma_hat.dim() {
        return Err(Error::DimensionMismatch(format!(
            "w: {}, x: {}, Σ̂: {}",
            w.len(),
            x_t.len(),
            sigma_hat.dim()
        )));
    }
    if !(phi_t > T::zero()) {
        return Err(Error::InvalidStep(format!(
            "stepsize {phi_t} must be positive"
        )));
    }
    let z = normal_quantile(1.0 - q / 2.0)?;
    let var = sigma_hat.quad_form(w).as_f64().max(0.0);
    Ok(ConfidenceInterval {
        center: dot(w, x_t).as_f64(),
        half_width: z * (phi_t.as_f64() * var).sqrt(),
        level: 1.0 - q,
    })
}
