//! Scalar abstraction shared by every estimator in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point type the likelihood, solvers and simulators are generic over.
///
/// Implemented for `f32` and `f64`. Linear algebra comes from `nalgebra`, so the
/// bound is its `RealField` plus the `num-traits` conversions used to move
/// constants and reports between `f64` and `Self`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` constant into `Self` (rounding for `f32`).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Absolute value; named to sidestep the `Signed`/`ComplexField` clash.
    #[inline]
    fn magnitude(self) -> Self {
        <Self as RealField>::max(self, -self)
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}
