//! Scalar abstraction for the numeric core.

use num_traits::float::FloatConst;
use num_traits::{Float, FromPrimitive};

/// Floating point scalar: f32 or f64.
///
/// Everything in the crate computes in an arbitrary IEEE float; the
/// tolerances quoted in the test suite assume `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + rustfft::FftNum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + std::iter::Sum
    + std::fmt::Display
    + std::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from f64. Constants and RNG output enter through here.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable in scalar type")
    }

    /// Widening conversion to f64 for reporting and rate fits.
    fn to_f64_lossy(self) -> f64;

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("usize not representable in scalar type")
    }
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f64::of(0.25), 0.25);
        assert_eq!(f32::of(0.25), 0.25f32);
        assert_eq!(f64::from_usize_exact(7), 7.0);
        assert_eq!(0.5f64.to_f64_lossy(), 0.5);
    }

    #[test]
    fn pi_constant_is_exact() {
        assert_eq!(<f64 as FloatConst>::PI(), std::f64::consts::PI);
    }
}
