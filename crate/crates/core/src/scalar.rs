//! Scalar abstraction shared by the analytic layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;
}

impl Real for f64 {
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

impl Real for f32 {
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn cst<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in target scalar")
}

/// Standard normal density.
#[inline]
pub fn normal_pdf<T: Real>(x: T) -> T {
    let inv_sqrt_2pi = cst::<T>(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(x * x) * cst(0.5)).exp()
}

/// Standard normal cdf, evaluated through `erfc` so the lower tail keeps full
/// relative precision.
#[inline]
pub fn normal_cdf<T: Real>(x: T) -> T {
    cst::<T>(0.5) * (-x * T::FRAC_1_SQRT_2()).erfc()
}

/// Upper tail `1 - Φ(x)`.
#[inline]
pub fn normal_sf<T: Real>(x: T) -> T {
    cst::<T>(0.5) * (x * T::FRAC_1_SQRT_2()).erfc()
}

/// Gaussian mass `Φ(b) - Φ(a)` for `a <= b`; infinite endpoints allowed.
///
/// Intervals in the upper half are evaluated as a difference of upper tails
/// so that mass far out in either tail is not lost to cancellation.
pub fn normal_mass<T: Real>(a: T, b: T) -> T {
    if a >= T::zero() {
        normal_sf(a) - normal_sf(b)
    } else if b <= T::zero() {
        normal_cdf(b) - normal_cdf(a)
    } else {
        T::one() - normal_cdf(a) - normal_sf(b)
    }
}
