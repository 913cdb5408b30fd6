//! Tabletop scene graphs: a table root with objects resting on it.
//!
//! Each child is placed by a contact face of its bounding box and planar
//! contact parameters `(dx, dy, dtheta)` measured from the table corner. The
//! prior over a child is uniform over the library, the allowed faces, and the
//! placement ranges left over by the face-dependent footprint.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bounding_box, voxel_to_mesh, Pose, TriangleMesh, VoxelGrid};
use crate::Scalar;

/// A learned object: voxel occupancy plus its derived mesh and bounds.
#[derive(Clone, Debug)]
pub struct ObjectModel<T: Scalar> {
    pub id: usize,
    pub name: String,
    pub grid: VoxelGrid<T>,
    pub mesh: TriangleMesh<T>,
    pub bbox_min: Vector3<T>,
    pub bbox_max: Vector3<T>,
}

impl<T: Scalar> ObjectModel<T> {
    pub fn from_grid(id: usize, name: impl Into<String>, grid: VoxelGrid<T>) -> Result<Self> {
        let mesh = voxel_to_mesh(&grid)?;
        let (bbox_min, bbox_max) = grid.bounds()?;
        debug_assert!(((bbox_max - bbox_min) - bounding_box(&grid)?).norm() < T::lit(1e-9));
        Ok(Self { id, name: name.into(), grid, mesh, bbox_min, bbox_max })
    }

    /// Bounding-box extents `(x, y, z)` in the model frame.
    pub fn extents(&self) -> Vector3<T> {
        self.bbox_max - self.bbox_min
    }

    pub fn bbox_center(&self) -> Vector3<T> {
        (self.bbox_min + self.bbox_max) * T::lit(0.5)
    }
}

/// Support surface: a thin box whose top face is the world `z = 0` plane,
/// spanning `[-width/2, width/2] × [-depth/2, depth/2]`.
#[derive(Clone, Debug)]
pub struct Table<T: Scalar> {
    pub width: T,
    pub depth: T,
    pub thickness: T,
    pub mesh: TriangleMesh<T>,
}

impl<T: Scalar> Table<T> {
    pub const DEFAULT_THICKNESS: f64 = 0.01;

    pub fn new(width: T, depth: T) -> Self {
        Self::with_thickness(width, depth, T::lit(Self::DEFAULT_THICKNESS))
    }

    pub fn with_thickness(width: T, depth: T, thickness: T) -> Self {
        let half = T::lit(0.5);
        let mesh = TriangleMesh::cuboid(
            Vector3::new(-width * half, -depth * half, -thickness),
            Vector3::new(width * half, depth * half, T::zero()),
        );
        Self { width, depth, thickness, mesh }
    }
}

/// Which bounding-box face of an object rests on the table: 1..=6 for the
/// model-frame directions `-z, +z, -x, +x, -y, +y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Face(u8);

impl Face {
    pub const ALL: [Face; 6] = [Face(1), Face(2), Face(3), Face(4), Face(5), Face(6)];

    pub fn new(n: u8) -> Result<Self> {
        if (1..=6).contains(&n) {
            Ok(Face(n))
        } else {
            Err(Error::InvalidFace(n))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Rotation taking the model frame to the resting orientation (pressed
    /// face pointing down) before any spin about the table normal.
    pub fn canonical_rotation<T: Scalar>(self) -> Pose<T> {
        let q = T::lit(FRAC_PI_2);
        match self.0 {
            1 => Pose::identity(),
            2 => Pose::rot_x(T::lit(PI)),
            3 => Pose::rot_y(-q),
            4 => Pose::rot_y(q),
            5 => Pose::rot_x(q),
            6 => Pose::rot_x(-q),
            _ => unreachable!("face validated on construction"),
        }
    }

    /// Extents `(footprint x, footprint y, height)` of a box with model-frame
    /// extents `e` after resting on this face, before spinning.
    pub fn resting_extents<T: Scalar>(self, e: &Vector3<T>) -> Vector3<T> {
        match self.0 {
            1 | 2 => Vector3::new(e.x, e.y, e.z),
            3 | 4 => Vector3::new(e.z, e.y, e.x),
            _ => Vector3::new(e.x, e.z, e.y),
        }
    }
}

impl TryFrom<u8> for Face {
    type Error = Error;
    fn try_from(n: u8) -> Result<Self> {
        Face::new(n)
    }
}

impl From<Face> for u8 {
    fn from(f: Face) -> u8 {
        f.0
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Planar placement: offsets from the table corner and spin about the table
/// normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactParams<T: Scalar> {
    pub dx: T,
    pub dy: T,
    pub dtheta: T,
}

impl<T: Scalar> ContactParams<T> {
    pub fn new(dx: T, dy: T, dtheta: T) -> Self {
        Self { dx, dy, dtheta }
    }
}

/// An object resting on the table.
#[derive(Clone, Debug)]
pub struct Child<T: Scalar> {
    pub object: Arc<ObjectModel<T>>,
    pub face: Face,
    pub contact: ContactParams<T>,
}

impl<T: Scalar> Child<T> {
    pub fn world_pose(&self, table: &Table<T>) -> Result<Pose<T>> {
        contact_to_pose(table, &self.object, self.face, &self.contact)
    }
}

#[derive(Clone, Debug)]
pub struct SceneGraph<T: Scalar> {
    pub table: Arc<Table<T>>,
    pub children: Vec<Child<T>>,
}

impl<T: Scalar> SceneGraph<T> {
    pub fn new(table: Arc<Table<T>>) -> Self {
        Self { table, children: Vec::new() }
    }

    pub fn with_child(mut self, child: Child<T>) -> Self {
        self.children.push(child);
        self
    }

    /// Meshes with their model-to-world poses, table first.
    pub fn placed_meshes(&self) -> Result<Vec<(&TriangleMesh<T>, Pose<T>)>> {
        let mut out = vec![(&self.table.mesh, Pose::identity())];
        for c in &self.children {
            out.push((&c.object.mesh, c.world_pose(&self.table)?));
        }
        Ok(out)
    }
}

/// Model-to-world pose placing `obj` on `face` with contact `cp`.
///
/// The footprint at zero spin has its lower corner at
/// `(-W/2 + dx, -D/2 + dy)`; the spin rotates about the footprint center. The
/// pressed face lies flush on `z = 0`.
pub fn contact_to_pose<T: Scalar>(
    table: &Table<T>,
    obj: &ObjectModel<T>,
    face: Face,
    cp: &ContactParams<T>,
) -> Result<Pose<T>> {
    let rest = face.resting_extents(&obj.extents());
    let (max_dx, max_dy) = (table.width - rest.x, table.depth - rest.y);
    if !(cp.dx >= T::zero() && cp.dx <= max_dx) {
        return Err(Error::ContactOutOfRange(format!("dx {} not in [0, {}]", cp.dx, max_dx)));
    }
    if !(cp.dy >= T::zero() && cp.dy <= max_dy) {
        return Err(Error::ContactOutOfRange(format!("dy {} not in [0, {}]", cp.dy, max_dy)));
    }
    if !(cp.dtheta >= T::zero() && cp.dtheta < T::two_pi()) {
        return Err(Error::ContactOutOfRange(format!("dtheta {} not in [0, 2pi)", cp.dtheta)));
    }
    Ok(pose_from_contact_unchecked(table, obj, face, cp))
}

pub(crate) fn pose_from_contact_unchecked<T: Scalar>(
    table: &Table<T>,
    obj: &ObjectModel<T>,
    face: Face,
    cp: &ContactParams<T>,
) -> Pose<T> {
    let half = T::lit(0.5);
    let rest = face.resting_extents(&obj.extents());
    let center = Vector3::new(
        -table.width * half + cp.dx + rest.x * half,
        -table.depth * half + cp.dy + rest.y * half,
        rest.z * half,
    );
    let rotation = Pose::rot_z(cp.dtheta).compose(&face.canonical_rotation());
    let offset = rotation.transform_vector(&obj.bbox_center());
    Pose::new(rotation.rotation, center - offset)
}

/// Support of one contact coordinate for a fixed object and face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Axis {
    /// Continuous uniform on `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// Uniform over `lo + i·step` for `i < count`.
    Lattice { lo: f64, step: f64, count: usize },
}

impl Axis {
    /// Lebesgue length for intervals, point count for lattices.
    pub fn measure(&self) -> f64 {
        match *self {
            Axis::Interval { lo, hi } => hi - lo,
            Axis::Lattice { count, .. } => count as f64,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Axis::Interval { lo, hi } => x >= lo && x <= hi,
            Axis::Lattice { .. } => self.lattice_index(x).is_some(),
        }
    }

    pub fn lattice_index(&self, x: f64) -> Option<usize> {
        let Axis::Lattice { lo, step, count } = *self else {
            return None;
        };
        if count == 1 {
            return ((x - lo).abs() <= 1e-12 * lo.abs().max(1.0)).then_some(0);
        }
        let i = ((x - lo) / step).round();
        let ok = i >= 0.0 && (i as usize) < count && (x - (lo + i * step)).abs() <= 1e-9 * step;
        ok.then_some(i as usize)
    }

    pub fn lattice_value(&self, i: usize) -> f64 {
        match *self {
            Axis::Lattice { lo, step, .. } => lo + i as f64 * step,
            Axis::Interval { lo, .. } => lo,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Axis::Interval { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            Axis::Lattice { count, .. } => self.lattice_value(rng.gen_range(0..count)),
        }
    }
}

/// Restriction of one contact coordinate's prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisDomain {
    /// Uniform over the whole valid range.
    Full,
    /// Point mass at the given value.
    Fixed(f64),
    /// Uniform over `count` evenly spaced values starting at the range minimum.
    Lattice(usize),
    /// Uniform over `[lo, hi]` intersected with the valid range.
    Range([f64; 2]),
}

/// Prior support of a child's placement. The default is the unrestricted
/// model: every face, full ranges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactDomain {
    pub faces: Vec<Face>,
    pub dx: AxisDomain,
    pub dy: AxisDomain,
    pub dtheta: AxisDomain,
}

impl Default for ContactDomain {
    fn default() -> Self {
        Self {
            faces: Face::ALL.to_vec(),
            dx: AxisDomain::Full,
            dy: AxisDomain::Full,
            dtheta: AxisDomain::Full,
        }
    }
}

impl ContactDomain {
    /// Axes `(dx, dy, dtheta)` for `obj` resting on `face`, or `None` when the
    /// placement has no support (object larger than the table, or a fixed
    /// value outside the valid range).
    pub fn axes<T: Scalar>(&self, table: &Table<T>, obj: &ObjectModel<T>, face: Face) -> Option<[Axis; 3]> {
        if !self.faces.contains(&face) {
            return None;
        }
        let rest = face.resting_extents(&obj.extents());
        let dx = resolve(self.dx, (table.width - rest.x).as_f64(), false)?;
        let dy = resolve(self.dy, (table.depth - rest.y).as_f64(), false)?;
        let dt = resolve(self.dtheta, TAU, true)?;
        Some([dx, dy, dt])
    }

    pub fn validate(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::EmptySupport);
        }
        for a in [self.dx, self.dy, self.dtheta] {
            let empty_range = matches!(a, AxisDomain::Range([lo, hi]) if !(lo < hi));
            if a == AxisDomain::Lattice(0) || empty_range {
                return Err(Error::EmptySupport);
            }
        }
        Ok(())
    }
}

fn resolve(d: AxisDomain, range: f64, half_open: bool) -> Option<Axis> {
    if !(range > 0.0) {
        return None;
    }
    match d {
        AxisDomain::Full => Some(Axis::Interval { lo: 0.0, hi: range }),
        AxisDomain::Fixed(v) => {
            let ok = v >= 0.0 && if half_open { v < range } else { v <= range };
            ok.then_some(Axis::Lattice { lo: v, step: 0.0, count: 1 })
        }
        AxisDomain::Lattice(n) if n > 0 => Some(Axis::Lattice { lo: 0.0, step: range / n as f64, count: n }),
        AxisDomain::Lattice(_) => None,
        AxisDomain::Range([lo, hi]) => {
            let (lo, hi) = (lo.max(0.0), hi.min(range));
            (hi > lo).then_some(Axis::Interval { lo, hi })
        }
    }
}

/// Prior over the children of a scene.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenePrior {
    pub library_size: usize,
    pub domain: ContactDomain,
}

impl ScenePrior {
    pub fn new(library_size: usize, domain: ContactDomain) -> Self {
        Self { library_size, domain }
    }

    /// Log prior density of one child; `-inf` outside the support.
    pub fn child_log_density<T: Scalar>(&self, table: &Table<T>, child: &Child<T>) -> f64 {
        if child.object.id >= self.library_size {
            return f64::NEG_INFINITY;
        }
        let Some(axes) = self.domain.axes(table, &child.object, child.face) else {
            return f64::NEG_INFINITY;
        };
        let c = &child.contact;
        let values = [c.dx.as_f64(), c.dy.as_f64(), c.dtheta.as_f64()];
        if values[2] >= TAU || !axes.iter().zip(values).all(|(a, v)| a.contains(v)) {
            return f64::NEG_INFINITY;
        }
        -(self.library_size as f64).ln()
            - (self.domain.faces.len() as f64).ln()
            - axes.iter().map(|a| a.measure().ln()).sum::<f64>()
    }

    pub fn log_density<T: Scalar>(&self, scene: &SceneGraph<T>) -> f64 {
        scene
            .children
            .iter()
            .map(|c| self.child_log_density(&scene.table, c))
            .sum()
    }

    /// Draws one child. Object/face pairs without support are redrawn, so the
    /// sample follows the prior restricted to its support.
    pub fn sample_child<T: Scalar, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        library: &[Arc<ObjectModel<T>>],
        table: &Table<T>,
    ) -> Result<Child<T>> {
        if library.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        self.domain.validate()?;
        let any_valid = library
            .iter()
            .any(|o| self.domain.faces.iter().any(|&f| self.domain.axes(table, o, f).is_some()));
        if !any_valid {
            return Err(Error::EmptySupport);
        }
        loop {
            let object = &library[rng.gen_range(0..library.len())];
            let face = self.domain.faces[rng.gen_range(0..self.domain.faces.len())];
            if let Some([ax, ay, at]) = self.domain.axes(table, object, face) {
                let contact = ContactParams::new(
                    T::lit(ax.sample(rng)),
                    T::lit(ay.sample(rng)),
                    T::lit(at.sample(rng)),
                );
                return Ok(Child { object: Arc::clone(object), face, contact });
            }
        }
    }
}

/// Log prior density of the scene's children under the unrestricted prior
/// with a library of `library_size` objects.
pub fn scene_prior_logpdf<T: Scalar>(scene: &SceneGraph<T>, library_size: usize) -> f64 {
    ScenePrior::new(library_size, ContactDomain::default()).log_density(scene)
}

/// Samples `n` children from the unrestricted prior.
pub fn sample_scene_prior<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    library: &[Arc<ObjectModel<T>>],
    table: Arc<Table<T>>,
) -> Result<SceneGraph<T>> {
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let prior = ScenePrior::new(library.len(), ContactDomain::default());
    let mut scene = SceneGraph::new(table);
    for _ in 0..n {
        let child = prior.sample_child(rng, library, &scene.table)?;
        scene.children.push(child);
    }
    Ok(scene)
}
