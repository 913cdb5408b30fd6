//! On-disk encodings: binary depth images and voxel grids, plus serde
//! records for poses and scenes.
//!
//! Depth (`SDPT`): magic, `u32` width and height, then `width·height` `f32`
//! values in row-major order. Voxels (`SVOX`): magic, `f32` resolution,
//! `f32[3]` origin, `u32` count, then `count` `i32[3]` indices. All integers
//! and floats are little-endian.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DepthImage, Pose, VoxelGrid};
use crate::scene::{Child, ContactParams, Face, ObjectModel, SceneGraph, Table};
use crate::Scalar;

pub const DEPTH_MAGIC: &[u8; 4] = b"SDPT";
pub const VOXEL_MAGIC: &[u8; 4] = b"SVOX";

struct Reader<'a> {
    buf: &'a [u8],
    format: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Format { format: self.format, reason: "truncated".into() });
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn bytes4(&mut self) -> Result<[u8; 4]> {
        Ok(self.take(4)?.try_into().expect("4 bytes"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes4()?))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.bytes4()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes4()?))
    }

    fn magic(&mut self, want: &[u8; 4]) -> Result<()> {
        if &self.bytes4()? != want {
            return Err(Error::Format { format: self.format, reason: "bad magic".into() });
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Format { format: self.format, reason: format!("{} trailing bytes", self.buf.len()) })
        }
    }
}

pub fn encode_depth<T: Scalar>(d: &DepthImage<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * d.data.len());
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&(d.width as u32).to_le_bytes());
    out.extend_from_slice(&(d.height as u32).to_le_bytes());
    for z in &d.data {
        out.extend_from_slice(&(z.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn decode_depth<T: Scalar>(bytes: &[u8]) -> Result<DepthImage<T>> {
    let mut r = Reader { buf: bytes, format: "SDPT" };
    r.magic(DEPTH_MAGIC)?;
    let w = r.u32()? as usize;
    let h = r.u32()? as usize;
    let n = w.checked_mul(h).filter(|n| n.checked_mul(4).is_some_and(|b| b <= r.buf.len()));
    let n = n.ok_or(Error::Format { format: "SDPT", reason: "truncated".into() })?;
    let data = (0..n).map(|_| r.f32().map(|z| T::lit(z as f64))).collect::<Result<Vec<T>>>()?;
    r.finish()?;
    DepthImage::new(w, h, data)
}

pub fn encode_voxels<T: Scalar>(g: &VoxelGrid<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 12 * g.len());
    out.extend_from_slice(VOXEL_MAGIC);
    out.extend_from_slice(&(g.resolution.as_f64() as f32).to_le_bytes());
    for a in 0..3 {
        out.extend_from_slice(&(g.origin[a].as_f64() as f32).to_le_bytes());
    }
    out.extend_from_slice(&(g.occupied.len() as u32).to_le_bytes());
    for idx in &g.occupied {
        for c in idx {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub fn decode_voxels<T: Scalar>(bytes: &[u8]) -> Result<VoxelGrid<T>> {
    let mut r = Reader { buf: bytes, format: "SVOX" };
    r.magic(VOXEL_MAGIC)?;
    let res = T::lit(r.f32()? as f64);
    let origin = Vector3::new(T::lit(r.f32()? as f64), T::lit(r.f32()? as f64), T::lit(r.f32()? as f64));
    let n = r.u32()? as usize;
    if n.checked_mul(12).is_none_or(|b| b > r.buf.len()) {
        return Err(Error::Format { format: "SVOX", reason: "truncated".into() });
    }
    let mut occupied = BTreeSet::new();
    for _ in 0..n {
        occupied.insert([r.i32()?, r.i32()?, r.i32()?]);
    }
    r.finish()?;
    VoxelGrid::new(res, origin, occupied)
}

pub fn read_depth<T: Scalar>(path: impl AsRef<Path>) -> Result<DepthImage<T>> {
    decode_depth(&std::fs::read(path)?)
}

pub fn read_voxels<T: Scalar>(path: impl AsRef<Path>) -> Result<VoxelGrid<T>> {
    decode_voxels(&std::fs::read(path)?)
}

/// Rigid pose with a `[w, x, y, z]` unit quaternion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub position: [f64; 3],
    pub quaternion_wxyz: [f64; 4],
}

impl PoseRecord {
    pub fn from_pose<T: Scalar>(p: &Pose<T>) -> Self {
        let q = p.quaternion_wxyz().map(|x| x.as_f64());
        let t = &p.translation;
        Self { position: [t.x.as_f64(), t.y.as_f64(), t.z.as_f64()], quaternion_wxyz: q }
    }

    pub fn to_pose<T: Scalar>(&self) -> Result<Pose<T>> {
        let n = self.quaternion_wxyz.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n.is_finite() && (n - 1.0).abs() < 1e-3) || !self.position.iter().all(|x| x.is_finite()) {
            return Err(Error::Format { format: "pose", reason: format!("quaternion norm {n}") });
        }
        let [x, y, z] = self.position.map(T::lit);
        Ok(Pose::from_wxyz(self.quaternion_wxyz.map(T::lit), Vector3::new(x, y, z)))
    }
}

/// One placed object, by library id.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChildRecord {
    pub object: usize,
    pub face: u8,
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRecord {
    pub width: f64,
    pub depth: f64,
}

/// Scene graph with objects referenced by library id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRecord {
    pub table: TableRecord,
    pub children: Vec<ChildRecord>,
}

impl ChildRecord {
    pub fn from_child<T: Scalar>(c: &Child<T>) -> Self {
        Self {
            object: c.object.id,
            face: c.face.get(),
            dx: c.contact.dx.as_f64(),
            dy: c.contact.dy.as_f64(),
            dtheta: c.contact.dtheta.as_f64(),
        }
    }

    /// Resolves the id against `library` (indexed by id) and checks ranges.
    pub fn to_child<T: Scalar>(&self, library: &[Arc<ObjectModel<T>>], table: &Table<T>) -> Result<Child<T>> {
        let object = library.get(self.object).cloned().ok_or(Error::UnknownObject(self.object))?;
        let child = Child {
            object,
            face: Face::new(self.face)?,
            contact: ContactParams::new(T::lit(self.dx), T::lit(self.dy), T::lit(self.dtheta)),
        };
        child.world_pose(table)?;
        Ok(child)
    }
}

impl SceneRecord {
    pub fn from_scene<T: Scalar>(s: &SceneGraph<T>) -> Self {
        Self {
            table: TableRecord { width: s.table.width.as_f64(), depth: s.table.depth.as_f64() },
            children: s.children.iter().map(ChildRecord::from_child).collect(),
        }
    }

    pub fn to_scene<T: Scalar>(&self, library: &[Arc<ObjectModel<T>>]) -> Result<SceneGraph<T>> {
        let table = Arc::new(Table::new(T::lit(self.table.width), T::lit(self.table.depth)));
        let mut scene = SceneGraph::new(table.clone());
        for c in &self.children {
            scene = scene.with_child(c.to_child(library, &table)?);
        }
        Ok(scene)
    }
}
