//! Scalar abstraction for the closed-form parts of the toolkit.
//!
//! Everything that is pure algebra (TTC branches, offset-variance law, TCME
//! and its bounds) is written against [`Real`], so it runs in `f32` as well as
//! `f64`. Quadrature, sampling and the simulation harness are `f64` only.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar with the special functions the resilience formulas need.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    fn erf(self) -> Self;
    fn erfc(self) -> Self;
    /// Scaled complementary error function `exp(x²)·erfc(x)`.
    fn erfcx(self) -> Self;

    /// Converts an `f64` literal. Panics only if the type cannot represent
    /// finite `f64` values, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    #[inline]
    fn erf(self) -> Self {
        crate::numerics::special::erf(self)
    }
    #[inline]
    fn erfc(self) -> Self {
        crate::numerics::special::erfc(self)
    }
    #[inline]
    fn erfcx(self) -> Self {
        crate::numerics::special::erfcx(self)
    }
}

impl Real for f32 {
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
    #[inline]
    fn erfcx(self) -> Self {
        crate::numerics::special::erfcx(self as f64) as f32
    }
}
