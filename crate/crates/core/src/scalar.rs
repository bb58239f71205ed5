//! Scalar abstraction shared by every numerical module.

use nalgebra as na;
use num_traits as nt;

/// Floating point types the physics is generic over.
///
/// Implemented for `f32` and `f64`. All acceptance-level numerics run in
/// `f64`; `f32` is useful for fast smoke runs and to keep the formulas honest
/// about which constants are exact.
pub trait Real:
    Copy + Send + Sync + nt::FloatConst + nt::FromPrimitive + na::RealField + std::fmt::Debug + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("representable literal")
    }

    /// Converts an integer count into `Self`.
    #[inline]
    fn count(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("representable count")
    }

    /// Lossy conversion back to `f64` for reporting.
    fn to_f64(self) -> f64;

    /// Machine epsilon.
    fn eps() -> Self;
}

impl Real for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Shorthand for [`Real::lit`].
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

pub type Vec3<T> = na::Vector3<T>;
pub type Mat3<T> = na::Matrix3<T>;

/// Lorentz factor of a sub-luminal velocity (c = 1).
#[inline]
pub fn gamma<T: Real>(v: &Vec3<T>) -> T {
    T::one() / (T::one() - v.norm_squared()).sqrt()
}

/// `|v><v|`
#[inline]
pub fn outer<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Mat3<T> {
    a * b.transpose()
}

/// `kappa(v) = 1 + gamma^2 |v><v|`.
#[inline]
pub fn kappa<T: Real>(v: &Vec3<T>) -> Mat3<T> {
    let g = gamma(v);
    Mat3::identity() + outer(v, v) * (g * g)
}

/// `kappa(v)^{-1} = 1 - |v><v|`.
#[inline]
pub fn kappa_inv<T: Real>(v: &Vec3<T>) -> Mat3<T> {
    Mat3::identity() - outer(v, v)
}

/// `artanh`-style log used throughout the Abraham model: `ln((1+s)/(1-s))`.
#[inline]
pub fn log_ratio<T: Real>(s: T) -> T {
    (lit::<T>(2.0) * s / (T::one() - s)).ln_1p()
}
