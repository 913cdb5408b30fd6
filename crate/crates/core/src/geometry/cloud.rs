use nalgebra::Vector3;

use super::Pose;
use crate::Scalar;

/// A list of 3D points in meters. The frame (camera or world) is implied by
/// the producer: [`depth_to_cloud`](super::depth_to_cloud) yields camera-frame
/// clouds, [`transform_cloud`] with a camera pose yields world-frame clouds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud<T: Scalar> {
    pub points: Vec<Vector3<T>>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn new(points: Vec<Vector3<T>>) -> Self {
        debug_assert!(points.iter().all(|p| p.iter().all(|c| c.is_finite())));
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Component-wise minimum and maximum, or `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Vector3<T>, Vector3<T>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.zip_map(p, |a, b| a.min(b)), hi.zip_map(p, |a, b| a.max(b)))
        }))
    }

    pub fn extend(&mut self, other: PointCloud<T>) {
        self.points.extend(other.points);
    }
}

/// Applies `pose` to every point.
pub fn transform_cloud<T: Scalar>(c: &PointCloud<T>, pose: &Pose<T>) -> PointCloud<T> {
    PointCloud::new(c.points.iter().map(|p| pose.transform_point(p)).collect())
}
