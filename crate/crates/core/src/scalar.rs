//! Scalar abstraction shared by every estimator in the crate.

use nalgebra::RealField;
use num_traits::ToPrimitive;
use std::fmt::{Debug, Display};

/// Real floating-point type the estimators are generic over (`f32` or `f64`).
///
/// Arithmetic and elementary functions come from [`RealField`]; conversions
/// to and from `f64` go through `num-traits`.
pub trait Scalar: RealField + Copy + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        nalgebra::convert(v)
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        nalgebra::convert(n as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
