//! Floating point abstraction shared by the geometry, rendering and scoring code.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Real scalar usable throughout the crate: `f32` or `f64`.
///
/// Geometry, rasterization and likelihood evaluation are written against this
/// trait. Log-weights and other accumulated statistics in the sampler are kept
/// in `f64` regardless of the scalar chosen for the scene.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("scalar representable as f64")
    }

    /// Largest finite value.
    fn max_finite() -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn max_finite() -> Self {
        f32::MAX
    }
}

impl Scalar for f64 {
    #[inline]
    fn max_finite() -> Self {
        f64::MAX
    }
}
