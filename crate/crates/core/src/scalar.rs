//! Scalar abstraction shared by every numeric module.
//!
//! The physics is written once against [`Real`]; `f64` is the working
//! precision for sweeps and acceptance runs, `f32` is supported for quick
//! low-precision exploration.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the spin-dynamics kernels.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar built on a [`Real`].
pub type Cplx<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    <T as FromPrimitive>::from_f64(x).expect("finite literal")
}

/// Converts `T` back to `f64` (for reporting and tolerances).
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    <T as ToPrimitive>::to_f64(&x).unwrap_or(f64::NAN)
}

/// `e^{-i theta}`.
#[inline]
pub fn phase<T: Real>(theta: T) -> Cplx<T> {
    Complex::new(theta.cos(), -theta.sin())
}

#[inline]
pub fn cr<T: Real>(re: T) -> Cplx<T> {
    Complex::new(re, T::zero())
}

/// `max(target, k * eps)`: absolute tolerances that stay meaningful in `f32`.
#[inline]
pub fn tol<T: Real>(target: f64, k: f64) -> T {
    let floor = T::default_epsilon() * lit::<T>(k);
    lit::<T>(target).max(floor)
}
