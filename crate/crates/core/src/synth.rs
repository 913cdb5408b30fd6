//! Procedural voxel objects for synthetic experiments and tests.
//!
//! Every shape is built in voxel units and placed in the learned-model frame:
//! x/y centered on the bounding box, z = 0 at the bottom. Dimensions are
//! chosen for a 1 cm resolution, where they approximate common household
//! objects.

use std::collections::BTreeSet;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{VoxelGrid, VoxelIndex};
use crate::scene::ObjectModel;
use crate::Scalar;

/// Builds a model from voxel cells, shifted so the occupied bounding box is
/// x/y centered with its bottom at z = 0.
pub fn from_cells<T: Scalar>(
    id: usize,
    name: &str,
    cells: impl IntoIterator<Item = VoxelIndex>,
    resolution: T,
) -> Result<ObjectModel<T>> {
    let cells: Vec<VoxelIndex> = cells.into_iter().collect();
    if cells.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut lo = cells[0];
    let mut hi = cells[0];
    for c in &cells {
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let occupied: BTreeSet<VoxelIndex> = cells.iter().map(|c| [c[0] - lo[0], c[1] - lo[1], c[2] - lo[2]]).collect();
    let n = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1];
    let half = T::lit(0.5);
    let origin = Vector3::new(
        -T::lit(n[0] as f64) * resolution * half,
        -T::lit(n[1] as f64) * resolution * half,
        T::zero(),
    );
    ObjectModel::from_grid(id, name, VoxelGrid::new(resolution, origin, occupied)?)
}

fn boxed(lo: [i32; 3], hi: [i32; 3]) -> impl Iterator<Item = VoxelIndex> {
    (lo[0]..hi[0]).flat_map(move |i| (lo[1]..hi[1]).flat_map(move |j| (lo[2]..hi[2]).map(move |k| [i, j, k])))
}

fn disk(radius: i32) -> impl Iterator<Item = (i32, i32)> {
    let r2 = (radius as f64).powi(2);
    (0..2 * radius).flat_map(move |i| {
        (0..2 * radius).filter_map(move |j| {
            let (x, y) = (i as f64 + 0.5 - radius as f64, j as f64 + 0.5 - radius as f64);
            (x * x + y * y <= r2).then_some((i, j))
        })
    })
}

/// Solid `nx × ny × nz` box.
pub fn block<T: Scalar>(id: usize, name: &str, n: [i32; 3], resolution: T) -> Result<ObjectModel<T>> {
    from_cells(id, name, boxed([0; 3], n), resolution)
}

/// Upright solid cylinder, rotationally symmetric about the model z axis.
pub fn cylinder<T: Scalar>(id: usize, radius: i32, height: i32, resolution: T) -> Result<ObjectModel<T>> {
    let cells = disk(radius).flat_map(|(i, j)| (0..height).map(move |k| [i, j, k]));
    from_cells(id, "cylinder", cells, resolution)
}

/// Cylindrical body with a closed loop handle on the +x side.
pub fn mug<T: Scalar>(id: usize, resolution: T) -> Result<ObjectModel<T>> {
    fine_mug(id, 1, resolution)
}

/// [`mug`] with every cell split `n` ways per axis, so the body is rounder.
/// Physical size is that of [`mug`] at `n · resolution`; `n < 1` leaves the grid empty.
pub fn fine_mug<T: Scalar>(id: usize, n: i32, resolution: T) -> Result<ObjectModel<T>> {
    let body = disk(4 * n).flat_map(move |(i, j)| (0..9 * n).map(move |k| [i, j, k]));
    let scaled = |lo: [i32; 3], hi: [i32; 3]| boxed(lo.map(|x| x * n), hi.map(|x| x * n));
    let handle = scaled([8, 3, 1], [11, 5, 3]).chain(scaled([8, 3, 6], [11, 5, 8])).chain(scaled([10, 3, 3], [11, 5, 6]));
    from_cells(id, "mug", body.chain(handle), resolution)
}

/// Tall box with an off-center cap.
pub fn mustard_bottle<T: Scalar>(id: usize, resolution: T) -> Result<ObjectModel<T>> {
    let cells = boxed([0, 0, 0], [7, 4, 15]).chain(boxed([4, 1, 15], [6, 3, 18]));
    from_cells(id, "mustard_bottle", cells, resolution)
}

/// Upright grip under a horizontal barrel that overhangs to one side.
pub fn drill<T: Scalar>(id: usize, resolution: T) -> Result<ObjectModel<T>> {
    let cells = boxed([0, 0, 0], [6, 6, 3])
        .chain(boxed([1, 1, 3], [4, 5, 13]))
        .chain(boxed([0, 1, 13], [14, 5, 18]));
    from_cells(id, "power_drill", cells, resolution)
}

/// C-shaped frame standing on its base.
pub fn clamp<T: Scalar>(id: usize, resolution: T) -> Result<ObjectModel<T>> {
    let cells = boxed([0, 0, 0], [9, 3, 2])
        .chain(boxed([0, 0, 2], [2, 3, 10]))
        .chain(boxed([0, 0, 10], [9, 3, 12]));
    from_cells(id, "clamp", cells, resolution)
}

/// Long handle with a tall head at one end.
pub fn hammer<T: Scalar>(id: usize, resolution: T) -> Result<ObjectModel<T>> {
    let cells = boxed([0, 2, 0], [16, 4, 2]).chain(boxed([13, 0, 0], [16, 6, 6]));
    from_cells(id, "hammer", cells, resolution)
}

/// Bar joining two square plates.
pub fn dumbbell<T: Scalar>(id: usize, resolution: T) -> Result<ObjectModel<T>> {
    let cells = boxed([0, 0, 0], [3, 6, 6])
        .chain(boxed([3, 2, 2], [11, 4, 4]))
        .chain(boxed([11, 0, 0], [14, 6, 6]));
    from_cells(id, "dumbbell", cells, resolution)
}

/// Ten mutually distinguishable objects with ids `0..10`.
pub fn library10<T: Scalar>(resolution: T) -> Result<Vec<ObjectModel<T>>> {
    Ok(vec![
        block(0, "cube", [5, 5, 5], resolution)?,
        block(1, "tall_box", [3, 3, 12], resolution)?,
        block(2, "plate", [12, 8, 2], resolution)?,
        cylinder(3, 3, 8, resolution)?,
        mug(4, resolution)?,
        mustard_bottle(5, resolution)?,
        drill(6, resolution)?,
        clamp(7, resolution)?,
        hammer(8, resolution)?,
        dumbbell(9, resolution)?,
    ])
}
