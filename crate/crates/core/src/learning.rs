//! Object models from a few calibrated depth views.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{depth_to_cloud, transform_cloud, voxelize, CameraIntrinsics, DepthImage, PointCloud, Pose};
use crate::scene::ObjectModel;
use crate::Scalar;

/// Axis-aligned region, open on every side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl CropBox {
    pub fn contains<T: Scalar>(&self, p: &Vector3<T>) -> bool {
        (0..3).all(|a| {
            let x = p[a].as_f64();
            x > self.min[a] && x < self.max[a]
        })
    }
}

/// World-frame union of the back-projected frames, frame by frame.
pub fn fuse_views<T: Scalar>(frames: &[DepthImage<T>], poses: &[Pose<T>], k: &CameraIntrinsics<T>) -> Result<PointCloud<T>> {
    if frames.len() != poses.len() {
        return Err(Error::LengthMismatch(format!("{} frames, {} poses", frames.len(), poses.len())));
    }
    if frames.is_empty() {
        return Err(Error::NoFrames);
    }
    let clouds: Vec<PointCloud<T>> = frames
        .par_iter()
        .zip(poses.par_iter())
        .map(|(f, p)| Ok(transform_cloud(&depth_to_cloud(f, k)?, p)))
        .collect::<Result<_>>()?;
    let mut out = PointCloud::default();
    for c in clouds {
        out.extend(c);
    }
    Ok(out)
}

/// Points strictly inside `region`, in their original order.
pub fn crop_to_region<T: Scalar>(c: &PointCloud<T>, region: &CropBox) -> PointCloud<T> {
    PointCloud::new(c.points.iter().copied().filter(|p| region.contains(p)).collect())
}

/// Fuse, crop, move into the model frame (x/y centered, bottom at z = 0),
/// voxelize, and mesh.
#[allow(clippy::too_many_arguments)]
pub fn learn_object<T: Scalar>(
    frames: &[DepthImage<T>],
    poses: &[Pose<T>],
    k: &CameraIntrinsics<T>,
    region: &CropBox,
    resolution: T,
    id: usize,
    name: &str,
) -> Result<ObjectModel<T>> {
    if !(resolution > T::zero()) {
        return Err(Error::InvalidResolution(resolution.as_f64()));
    }
    let cloud = crop_to_region(&fuse_views(frames, poses, k)?, region);
    let (lo, hi) = cloud.bounds().ok_or(Error::EmptyCloud)?;
    let half = T::lit(0.5);
    let shift = Vector3::new(-(lo.x + hi.x) * half, -(lo.y + hi.y) * half, -lo.z);
    let local = PointCloud::new(cloud.points.iter().map(|p| p + shift).collect());
    ObjectModel::from_grid(id, name, voxelize(&local, resolution)?)
}
