//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::{Product, Sum};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Product
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Squared modulus `|z|²`.
#[inline]
pub fn abs2<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// `0·ln 0 = 0` convention.
#[inline]
pub fn xlogx<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x * x.ln()
    }
}

/// `p·ln(p/q)` with `0·ln 0 = 0·ln(0/0) = 0`.
#[inline]
pub fn xlogy_ratio<T: Real>(p: T, q: T) -> T {
    if p <= T::zero() {
        T::zero()
    } else {
        p * (p / q).ln()
    }
}

/// Numerically stable `ln Σ exp(v)`. Returns `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp<T: Real>(v: &[T]) -> T {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    if max == T::infinity() {
        return max;
    }
    max + v.iter().map(|&x| (x - max).exp()).sum::<T>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_neg_infinity() {
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
        let v = [f64::NEG_INFINITY, 0.0, 0.0];
        assert!((log_sum_exp(&v) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_conventions() {
        assert_eq!(xlogx(0.0f64), 0.0);
        assert_eq!(xlogy_ratio(0.0f64, 0.0), 0.0);
        assert!((xlogy_ratio(0.5f64, 0.25) - 0.5 * 2f64.ln()).abs() < 1e-15);
    }
}
