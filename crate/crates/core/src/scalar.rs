//! Scalar abstraction shared by every numeric module.

use nalgebra::RealField;
use num_complex::Complex;

/// Real floating-point scalar the library is generic over (`f32` or `f64`).
///
/// All tolerances quoted in the docs and tests assume `f64`; `f32` works but
/// only reaches single-precision accuracy.
pub trait Real: RealField + Copy {}

impl<T: RealField + Copy> Real for T {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub(crate) fn from_usize<T: Real>(n: usize) -> T {
    nalgebra::convert(n as f64)
}

#[inline]
pub(crate) fn cx<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `-i`.
#[inline]
pub(crate) fn minus_i<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), -T::one())
}
