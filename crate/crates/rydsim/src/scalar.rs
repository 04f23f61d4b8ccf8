//! Floating-point scalar abstraction.
//!
//! Every numerical routine in the crate is generic over [`Real`], so the
//! same code runs in `f32` or `f64`. The trait leans on `nalgebra`'s
//! `RealField` for transcendentals and on `num_traits::FromPrimitive` for
//! constant conversion; [`rf`] is the shorthand used throughout for
//! embedding `f64` literals.

use num_complex::Complex;
use num_traits::FromPrimitive;

/// Scalar type for all floating-point computation in the crate.
pub trait Real:
    nalgebra::RealField
    + FromPrimitive
    + Copy
    + Default
    + std::fmt::Display
    + std::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Round-trip to `f64`, used by serialization and formatting paths.
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

/// Convert an `f64` constant into the working scalar type.
#[inline]
pub fn rf<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant representable in scalar type")
}

/// `exp(i theta)` without going through a complex exponential.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// 2π in the working scalar type.
#[inline]
pub fn two_pi<T: Real>() -> T {
    T::two_pi()
}
