
use super::{CameraIntrinsics, PointCloud};
use crate::error::{Error, Result};
use crate::Scalar;

/// Row-major metric depth image. Depth equal to the camera's far plane marks
/// a pixel that saw nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage<T: Scalar> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> DepthImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::LengthMismatch(format!(
                "{} depths for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Image filled with the background sentinel of `k`.
    pub fn background(k: &CameraIntrinsics<T>) -> Self {
        Self {
            width: k.width,
            height: k.height,
            data: vec![k.far; k.pixel_count()],
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> T {
        self.data[v * self.width + u]
    }

    pub fn check_dims(&self, k: &CameraIntrinsics<T>) -> Result<()> {
        if self.width != k.width || self.height != k.height {
            return Err(Error::DimensionMismatch {
                got_width: self.width,
                got_height: self.height,
                want_width: k.width,
                want_height: k.height,
            });
        }
        Ok(())
    }

    pub fn foreground_count(&self, k: &CameraIntrinsics<T>) -> usize {
        self.data.iter().filter(|&&z| !k.is_background(z)).count()
    }

    pub fn cast<U: Scalar>(&self) -> DepthImage<U> {
        DepthImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|z| U::lit(z.as_f64())).collect(),
        }
    }
}

/// Back-projects every non-background pixel to a camera-frame point, in
/// row-major pixel order.
pub fn depth_to_cloud<T: Scalar>(d: &DepthImage<T>, k: &CameraIntrinsics<T>) -> Result<PointCloud<T>> {
    d.check_dims(k)?;
    let mut points = Vec::with_capacity(d.data.len());
    for v in 0..d.height {
        for u in 0..d.width {
            let z = d.get(u, v);
            if !k.is_background(z) {
                points.push(k.backproject(T::lit(u as f64), T::lit(v as f64), z));
            }
        }
    }
    Ok(PointCloud::new(points))
}

/// Projects camera-frame points to the nearest pixel center and keeps the
/// closest depth per pixel. Points behind the near plane, beyond the far plane
/// or outside the image are dropped.
pub fn cloud_to_depth<T: Scalar>(cloud: &PointCloud<T>, k: &CameraIntrinsics<T>) -> DepthImage<T> {
    let mut img = DepthImage::background(k);
    for p in &cloud.points {
        if !(p.z >= k.near && p.z < k.far) {
            continue;
        }
        let (u, v) = k.project(p);
        let (u, v) = (u.round(), v.round());
        if u < T::zero() || v < T::zero() {
            continue;
        }
        let (u, v) = (u.as_f64() as usize, v.as_f64() as usize);
        if u >= k.width || v >= k.height {
            continue;
        }
        let slot = &mut img.data[v * k.width + u];
        if p.z < *slot {
            *slot = p.z;
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn principal_ray_pixel() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1, 1, 0.1, 10.0).unwrap();
        let d = DepthImage::new(1, 1, vec![2.0]).unwrap();
        let c = depth_to_cloud(&d, &k).unwrap();
        assert_eq!(c.points, vec![Vector3::new(0.0, 0.0, 2.0)]);
    }

    #[test]
    fn all_background_gives_empty_cloud() {
        let k = CameraIntrinsics::<f64>::centered(4, 3, 1.0, 0.1, 3.0).unwrap();
        let c = depth_to_cloud(&DepthImage::background(&k), &k).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn two_by_two_matches_pinhole_formula() {
        let (fx, fy, cx, cy) = (2.0, 3.0, 0.5, 0.25);
        let k = CameraIntrinsics::new(fx, fy, cx, cy, 2, 2, 0.1, 10.0).unwrap();
        let depths = [1.0, 2.0, 3.0, 4.0];
        let d = DepthImage::new(2, 2, depths.to_vec()).unwrap();
        let c = depth_to_cloud(&d, &k).unwrap();
        let mut want = Vec::new();
        for (i, z) in depths.iter().enumerate() {
            let (u, v) = ((i % 2) as f64, (i / 2) as f64);
            want.push(Vector3::new((u - cx) * z / fx, (v - cy) * z / fy, *z));
        }
        for (a, b) in c.points.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let k = CameraIntrinsics::<f64>::centered(4, 4, 1.0, 0.1, 3.0).unwrap();
        let d = DepthImage::new(2, 2, vec![1.0; 4]).unwrap();
        assert!(matches!(depth_to_cloud(&d, &k), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn reprojection_recovers_pixel_centers() {
        let k = CameraIntrinsics::<f64>::new(37.0, 41.0, 7.3, 5.9, 16, 12, 0.1, 10.0).unwrap();
        let data = (0..16 * 12).map(|i| 0.5 + (i as f64 * 0.37).sin().abs() * 3.0).collect();
        let d = DepthImage::new(16, 12, data).unwrap();
        let c = depth_to_cloud(&d, &k).unwrap();
        for (i, p) in c.points.iter().enumerate() {
            let (u, v) = k.project(p);
            assert!((u - (i % 16) as f64).abs() < 1e-6);
            assert!((v - (i / 16) as f64).abs() < 1e-6);
        }
        assert_eq!(cloud_to_depth(&c, &k), d);
    }
}
