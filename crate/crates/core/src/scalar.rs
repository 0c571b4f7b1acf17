//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every `f64` is representable (possibly rounded) in both impls.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }

    /// Tolerance floor: `max(tol, factor * epsilon)`. Keeps f64-calibrated thresholds meaningful for f32.
    #[inline]
    fn tol(tol: f64, factor: f64) -> Self {
        Self::of(tol).max(Self::epsilon() * Self::of(factor))
    }
}

impl Real for f32 {}
impl Real for f64 {}
