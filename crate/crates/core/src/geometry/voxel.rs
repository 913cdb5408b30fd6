use std::collections::BTreeSet;

use nalgebra::Vector3;

use super::PointCloud;
use crate::error::{Error, Result};
use crate::Scalar;

/// Integer voxel coordinate.
pub type VoxelIndex = [i32; 3];

/// Sparse occupancy grid. Voxel `(i, j, k)` spans
/// `[origin + i·r, origin + (i+1)·r)` along each axis.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid<T: Scalar> {
    pub resolution: T,
    pub origin: Vector3<T>,
    pub occupied: BTreeSet<VoxelIndex>,
}

impl<T: Scalar> VoxelGrid<T> {
    pub fn new(resolution: T, origin: Vector3<T>, occupied: BTreeSet<VoxelIndex>) -> Result<Self> {
        if !(resolution > T::zero()) {
            return Err(Error::InvalidResolution(resolution.as_f64()));
        }
        Ok(Self { resolution, origin, occupied })
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn is_occupied(&self, idx: &VoxelIndex) -> bool {
        self.occupied.contains(idx)
    }

    /// Inclusive index range `(min, max)` of occupied voxels.
    pub fn index_range(&self) -> Result<(VoxelIndex, VoxelIndex)> {
        let mut it = self.occupied.iter();
        let first = *it.next().ok_or(Error::EmptyGrid)?;
        Ok(it.fold((first, first), |(mut lo, mut hi), v| {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
            (lo, hi)
        }))
    }

    /// Metric corners `(min, max)` of the occupied region.
    pub fn bounds(&self) -> Result<(Vector3<T>, Vector3<T>)> {
        let (lo, hi) = self.index_range()?;
        let r = self.resolution;
        let corner = |i: VoxelIndex, off: i32| {
            Vector3::new(
                self.origin.x + T::lit((i[0] + off) as f64) * r,
                self.origin.y + T::lit((i[1] + off) as f64) * r,
                self.origin.z + T::lit((i[2] + off) as f64) * r,
            )
        };
        Ok((corner(lo, 0), corner(hi, 1)))
    }

    /// Voxel containing `p`.
    pub fn index_of(&self, p: &Vector3<T>) -> VoxelIndex {
        let r = self.resolution;
        let f = |a: T, o: T| ((a - o) / r).floor().as_f64() as i32;
        [f(p.x, self.origin.x), f(p.y, self.origin.y), f(p.z, self.origin.z)]
    }

    pub fn center_of(&self, idx: &VoxelIndex) -> Vector3<T> {
        let r = self.resolution;
        let half = T::lit(0.5);
        Vector3::new(
            self.origin.x + (T::lit(idx[0] as f64) + half) * r,
            self.origin.y + (T::lit(idx[1] as f64) + half) * r,
            self.origin.z + (T::lit(idx[2] as f64) + half) * r,
        )
    }
}

/// Bins a cloud into voxels of edge `resolution`. The grid origin is the cloud
/// minimum snapped down to a multiple of the resolution.
pub fn voxelize<T: Scalar>(c: &PointCloud<T>, resolution: T) -> Result<VoxelGrid<T>> {
    if !(resolution > T::zero()) {
        return Err(Error::InvalidResolution(resolution.as_f64()));
    }
    let (lo, _) = c.bounds().ok_or(Error::EmptyCloud)?;
    let origin = lo.map(|a| (a / resolution).floor() * resolution);
    let mut grid = VoxelGrid::new(resolution, origin, BTreeSet::new())?;
    for p in &c.points {
        let idx = grid.index_of(p);
        grid.occupied.insert(idx);
    }
    Ok(grid)
}

/// Axis-aligned extents `(x, y, z)` of the occupied region, in meters.
pub fn bounding_box<T: Scalar>(g: &VoxelGrid<T>) -> Result<Vector3<T>> {
    let (lo, hi) = g.index_range()?;
    Ok(Vector3::new(
        T::lit((hi[0] - lo[0] + 1) as f64) * g.resolution,
        T::lit((hi[1] - lo[1] + 1) as f64) * g.resolution,
        T::lit((hi[2] - lo[2] + 1) as f64) * g.resolution,
    ))
}
