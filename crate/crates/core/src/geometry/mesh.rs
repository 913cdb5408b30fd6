use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;

use super::voxel::{VoxelGrid, VoxelIndex};
use crate::error::{Error, Result};
use crate::Scalar;

/// Indexed triangle mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh<T: Scalar> {
    pub vertices: Vec<Vector3<T>>,
    pub triangles: Vec<[u32; 3]>,
}

impl<T: Scalar> TriangleMesh<T> {
    pub fn new(vertices: Vec<Vector3<T>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len() as u32;
        if triangles.iter().flatten().any(|&i| i >= n) {
            return Err(Error::Format {
                format: "mesh",
                reason: "triangle index out of range".into(),
            });
        }
        Ok(Self { vertices, triangles })
    }

    /// Axis-aligned box mesh with outward-facing triangles.
    pub fn cuboid(min: Vector3<T>, max: Vector3<T>) -> Self {
        let mut vertices = Vec::with_capacity(8);
        for c in 0..8u8 {
            let pick = |bit: u8, a: usize| if c & bit != 0 { max[a] } else { min[a] };
            vertices.push(Vector3::new(pick(1, 0), pick(2, 1), pick(4, 2)));
        }
        let at = |c: [i32; 3]| (c[0] | (c[1] << 1) | (c[2] << 2)) as u32;
        let mut triangles = Vec::with_capacity(12);
        for face in &FACES {
            let q = face.corners.map(at);
            triangles.push([q[0], q[1], q[2]]);
            triangles.push([q[0], q[2], q[3]]);
        }
        Self { vertices, triangles }
    }

    pub fn triangle(&self, i: usize) -> [Vector3<T>; 3] {
        self.triangles[i].map(|j| self.vertices[j as usize])
    }

    pub fn surface_area(&self) -> T {
        let half = T::lit(0.5);
        (0..self.triangles.len()).fold(T::zero(), |acc, i| {
            let [a, b, c] = self.triangle(i);
            acc + (b - a).cross(&(c - a)).norm() * half
        })
    }

    /// True when every undirected edge is used by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        let mut edges: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        !edges.is_empty() && edges.values().all(|&n| n == 2)
    }

    pub fn bounds(&self) -> Option<(Vector3<T>, Vector3<T>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (lo.zip_map(p, |a, b| a.min(b)), hi.zip_map(p, |a, b| a.max(b)))
        }))
    }
}

struct FaceSpec {
    neighbor: [i32; 3],
    /// Unit-cube corners, counter-clockwise seen from outside.
    corners: [[i32; 3]; 4],
}

const FACES: [FaceSpec; 6] = [
    FaceSpec { neighbor: [-1, 0, 0], corners: [[0, 0, 0], [0, 0, 1], [0, 1, 1], [0, 1, 0]] },
    FaceSpec { neighbor: [1, 0, 0], corners: [[1, 0, 0], [1, 1, 0], [1, 1, 1], [1, 0, 1]] },
    FaceSpec { neighbor: [0, -1, 0], corners: [[0, 0, 0], [1, 0, 0], [1, 0, 1], [0, 0, 1]] },
    FaceSpec { neighbor: [0, 1, 0], corners: [[0, 1, 0], [0, 1, 1], [1, 1, 1], [1, 1, 0]] },
    FaceSpec { neighbor: [0, 0, -1], corners: [[0, 0, 0], [0, 1, 0], [1, 1, 0], [1, 0, 0]] },
    FaceSpec { neighbor: [0, 0, 1], corners: [[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]] },
];

/// Cube-per-voxel surface mesh. Faces between two occupied voxels are
/// dropped; shared corners are welded.
pub fn voxel_to_mesh<T: Scalar>(g: &VoxelGrid<T>) -> Result<TriangleMesh<T>> {
    if g.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut corner_ids: BTreeMap<VoxelIndex, u32> = BTreeMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let r = g.resolution;
    for v in &g.occupied {
        for face in &FACES {
            let n = [v[0] + face.neighbor[0], v[1] + face.neighbor[1], v[2] + face.neighbor[2]];
            if g.is_occupied(&n) {
                continue;
            }
            let ids = face.corners.map(|c| {
                let key = [v[0] + c[0], v[1] + c[1], v[2] + c[2]];
                *corner_ids.entry(key).or_insert_with(|| {
                    vertices.push(Vector3::new(
                        g.origin.x + T::lit(key[0] as f64) * r,
                        g.origin.y + T::lit(key[1] as f64) * r,
                        g.origin.z + T::lit(key[2] as f64) * r,
                    ));
                    (vertices.len() - 1) as u32
                })
            });
            triangles.push([ids[0], ids[1], ids[2]]);
            triangles.push([ids[0], ids[2], ids[3]]);
        }
    }
    Ok(TriangleMesh { vertices, triangles })
}
