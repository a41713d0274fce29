//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the covariance-matrix machinery.
///
/// Implemented for `f32` and `f64`. Tolerances throughout the crate are
/// stated for double precision and passed through [`Real::tol`], which
/// widens them for narrower types.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Converts a double-precision tolerance into one this type can resolve.
    fn tol(base: f64) -> Self;

    /// Largest condition number accepted before a linear solve is refused.
    fn max_condition() -> Self;

    /// Lossy literal conversion.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    #[inline]
    fn tol(base: f64) -> Self {
        base
    }

    #[inline]
    fn max_condition() -> Self {
        1e12
    }
}

impl Real for f32 {
    #[inline]
    fn tol(base: f64) -> Self {
        (base * 1e4).max(1e-6) as f32
    }

    #[inline]
    fn max_condition() -> Self {
        1e6
    }
}
