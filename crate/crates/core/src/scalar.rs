//! Scalar abstraction shared by the numeric modules.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the depth, timebase, alignment and
/// triangulation code: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    <T as FromPrimitive>::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts `T` back to `f64` (lossless for the supported types).
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    <T as ToPrimitive>::to_f64(&x).expect("scalar convertible to f64")
}

/// Positive infinity in `T`, used as the far/no-return depth sentinel.
#[inline]
pub fn infinity<T: Real>() -> T {
    lit(f64::INFINITY)
}

#[inline]
pub fn is_finite<T: Real>(x: T) -> bool {
    to_f64(x).is_finite()
}
