use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::Scalar;

/// Pinhole intrinsics with near/far clip planes.
///
/// Camera frame: +z forward, +x right, +y down. Pixel `(u, v)` has its center
/// at image coordinates `(u, v)`, so a camera point projects to
/// `(fx·x/z + cx, fy·y/z + cy)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics<T: Scalar> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
    pub near: T,
    pub far: T,
}

impl<T: Scalar> CameraIntrinsics<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize, near: T, far: T) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height, near, far };
        k.validate()?;
        Ok(k)
    }

    /// Square-pixel camera with the principal point at the image center and a
    /// focal length of `focal_scale · width` pixels.
    pub fn centered(width: usize, height: usize, focal_scale: T, near: T, far: T) -> Result<Self> {
        let f = focal_scale * T::lit(width as f64);
        Self::new(
            f,
            f,
            T::lit((width as f64 - 1.0) / 2.0),
            T::lit((height as f64 - 1.0) / 2.0),
            width,
            height,
            near,
            far,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidIntrinsics(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be positive");
        }
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return bad("focal lengths must be positive");
        }
        let half = T::lit(0.5);
        let inside = |c: T, n: usize| c >= -half && c <= T::lit(n as f64) - half;
        if !inside(self.cx, self.width) || !inside(self.cy, self.height) {
            return bad("principal point outside the image");
        }
        if !(self.near > T::zero() && self.near < self.far && self.far.is_finite()) {
            return bad("clip planes must satisfy 0 < near < far < inf");
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Same field of view at a different resolution.
    pub fn rescaled(&self, width: usize, height: usize) -> Result<Self> {
        let sx = T::lit(width as f64 / self.width as f64);
        let sy = T::lit(height as f64 / self.height as f64);
        let half = T::lit(0.5);
        Self::new(
            self.fx * sx,
            self.fy * sy,
            (self.cx + half) * sx - half,
            (self.cy + half) * sy - half,
            width,
            height,
            self.near,
            self.far,
        )
    }

    #[inline]
    pub fn project(&self, p: &Vector3<T>) -> (T, T) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    #[inline]
    pub fn backproject(&self, u: T, v: T, z: T) -> Vector3<T> {
        Vector3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    /// Whether a stored depth is the background sentinel.
    #[inline]
    pub fn is_background(&self, z: T) -> bool {
        z >= self.far
    }

    pub fn cast<U: Scalar>(&self) -> CameraIntrinsics<U> {
        CameraIntrinsics {
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            width: self.width,
            height: self.height,
            near: U::lit(self.near.as_f64()),
            far: U::lit(self.far.as_f64()),
        }
    }
}
