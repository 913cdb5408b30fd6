//! Software z-buffer depth rasterizer.
//!
//! Triangles are clipped against the near plane, projected with the pinhole
//! model and scan-converted at pixel centers using a top-left fill rule.
//! Depth is interpolated perspective-correctly (linear in `1/z`), so a pixel
//! stores the exact camera-frame `z` of the plane hit by its center ray.
//! Back faces are not culled.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{CameraIntrinsics, DepthImage, Pose, TriangleMesh};
use crate::scene::SceneGraph;
use crate::Scalar;

/// Half-open pixel rectangle `[u0, u1) × [v0, v1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelRect {
    pub u0: usize,
    pub v0: usize,
    pub u1: usize,
    pub v1: usize,
}

impl PixelRect {
    pub fn union(self, other: PixelRect) -> PixelRect {
        PixelRect {
            u0: self.u0.min(other.u0),
            v0: self.v0.min(other.v0),
            u1: self.u1.max(other.u1),
            v1: self.v1.max(other.v1),
        }
    }

    fn include(rect: &mut Option<PixelRect>, u: usize, v: usize) {
        let p = PixelRect { u0: u, v0: v, u1: u + 1, v1: v + 1 };
        *rect = Some(rect.map_or(p, |r| r.union(p)));
    }
}

#[derive(Clone, Copy)]
struct ScreenVertex<T> {
    x: T,
    y: T,
    z: T,
}

/// Rasterizes `mesh` into `img`, keeping the nearest depth per pixel.
///
/// `model_to_camera` maps mesh vertices into the camera frame. Returns the
/// bounding rectangle of pixels whose depth was lowered, if any.
pub fn rasterize_mesh<T: Scalar>(
    img: &mut DepthImage<T>,
    mesh: &TriangleMesh<T>,
    model_to_camera: &Pose<T>,
    k: &CameraIntrinsics<T>,
) -> Option<PixelRect> {
    let cam: Vec<Vector3<T>> = mesh.vertices.iter().map(|v| model_to_camera.transform_point(v)).collect();
    let mut touched = None;
    let mut poly: [Vector3<T>; 4] = [Vector3::zeros(); 4];
    for tri in &mesh.triangles {
        let [a, b, c] = tri.map(|i| cam[i as usize]);
        if a.z < k.near && b.z < k.near && c.z < k.near {
            continue;
        }
        if a.z > k.far && b.z > k.far && c.z > k.far {
            continue;
        }
        let n = clip_near([a, b, c], k.near, &mut poly);
        if n < 3 {
            continue;
        }
        let screen: [ScreenVertex<T>; 4] = poly.map(|p| {
            let (x, y) = k.project(&p);
            ScreenVertex { x, y, z: p.z }
        });
        for i in 1..n - 1 {
            fill_triangle(img, k, [screen[0], screen[i], screen[i + 1]], &mut touched);
        }
    }
    touched
}

/// Sutherland–Hodgman clip of a triangle against `z >= near`. Writes up to
/// four vertices into `out` and returns the count.
fn clip_near<T: Scalar>(tri: [Vector3<T>; 3], near: T, out: &mut [Vector3<T>; 4]) -> usize {
    let mut n = 0;
    for i in 0..3 {
        let cur = tri[i];
        let nxt = tri[(i + 1) % 3];
        let cur_in = cur.z >= near;
        let nxt_in = nxt.z >= near;
        if cur_in {
            out[n] = cur;
            n += 1;
        }
        if cur_in != nxt_in {
            out[n] = near_crossing(cur, nxt, near);
            n += 1;
        }
    }
    n
}

/// Intersection of segment `ab` with `z = near`, computed from a canonical
/// endpoint order so both triangles sharing an edge get the same point.
fn near_crossing<T: Scalar>(a: Vector3<T>, b: Vector3<T>, near: T) -> Vector3<T> {
    let (p, q) = if (a.z, a.x, a.y) <= (b.z, b.x, b.y) { (a, b) } else { (b, a) };
    let t = (near - p.z) / (q.z - p.z);
    let mut r = p + (q - p) * t;
    r.z = near;
    r
}

#[inline]
fn edge_raw<T: Scalar>(a: &ScreenVertex<T>, b: &ScreenVertex<T>, px: T, py: T) -> T {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

/// Edge function with exact antisymmetry under swapping `a` and `b`.
#[inline]
fn edge<T: Scalar>(a: &ScreenVertex<T>, b: &ScreenVertex<T>, px: T, py: T) -> T {
    if (a.x, a.y) <= (b.x, b.y) {
        edge_raw(a, b, px, py)
    } else {
        -edge_raw(b, a, px, py)
    }
}

/// Top-left rule for an edge of a positively oriented triangle (interior on
/// the side where the edge function is positive, image y pointing down).
#[inline]
fn is_top_left<T: Scalar>(a: &ScreenVertex<T>, b: &ScreenVertex<T>) -> bool {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    dy < T::zero() || (dy == T::zero() && dx > T::zero())
}

#[inline]
fn covers<T: Scalar>(e: T, top_left: bool) -> bool {
    e > T::zero() || (e == T::zero() && top_left)
}

fn fill_triangle<T: Scalar>(
    img: &mut DepthImage<T>,
    k: &CameraIntrinsics<T>,
    tri: [ScreenVertex<T>; 3],
    touched: &mut Option<PixelRect>,
) {
    let [v0, mut v1, mut v2] = tri;
    let mut area = edge(&v0, &v1, v2.x, v2.y);
    if area == T::zero() || !area.is_finite() {
        return;
    }
    if area < T::zero() {
        std::mem::swap(&mut v1, &mut v2);
        area = -area;
    }
    let min_x = v0.x.min(v1.x).min(v2.x).ceil();
    let max_x = v0.x.max(v1.x).max(v2.x).floor();
    let min_y = v0.y.min(v1.y).min(v2.y).ceil();
    let max_y = v0.y.max(v1.y).max(v2.y).floor();
    let last_u = T::lit((k.width - 1) as f64);
    let last_v = T::lit((k.height - 1) as f64);
    if max_x < T::zero() || max_y < T::zero() || min_x > last_u || min_y > last_v {
        return;
    }
    let u0 = min_x.max(T::zero()).as_f64() as usize;
    let u1 = max_x.min(last_u).as_f64() as usize;
    let v0i = min_y.max(T::zero()).as_f64() as usize;
    let v1i = max_y.min(last_v).as_f64() as usize;

    let tl0 = is_top_left(&v1, &v2);
    let tl1 = is_top_left(&v2, &v0);
    let tl2 = is_top_left(&v0, &v1);
    let (iz0, iz1, iz2) = (T::one() / v0.z, T::one() / v1.z, T::one() / v2.z);
    for v in v0i..=v1i {
        let py = T::lit(v as f64);
        let row = v * k.width;
        for u in u0..=u1 {
            let px = T::lit(u as f64);
            let w0 = edge(&v1, &v2, px, py);
            if !covers(w0, tl0) {
                continue;
            }
            let w1 = edge(&v2, &v0, px, py);
            if !covers(w1, tl1) {
                continue;
            }
            let w2 = edge(&v0, &v1, px, py);
            if !covers(w2, tl2) {
                continue;
            }
            let inv_z = (w0 * iz0 + w1 * iz1 + w2 * iz2) / area;
            let z = T::one() / inv_z;
            if !(z >= k.near && z <= k.far) {
                continue;
            }
            let slot = &mut img.data[row + u];
            if z < *slot {
                *slot = z;
                PixelRect::include(touched, u, v);
            }
        }
    }
}

/// Renders meshes placed by model-to-world poses, seen from a camera-to-world
/// pose.
pub fn render_meshes<T: Scalar>(
    meshes: &[(&TriangleMesh<T>, Pose<T>)],
    camera: &Pose<T>,
    k: &CameraIntrinsics<T>,
) -> DepthImage<T> {
    let world_to_camera = camera.inverse();
    let mut img = DepthImage::background(k);
    for (mesh, pose) in meshes {
        rasterize_mesh(&mut img, mesh, &world_to_camera.compose(pose), k);
    }
    img
}

/// Depth image of the full scene (table and every child).
pub fn render_depth<T: Scalar>(
    scene: &SceneGraph<T>,
    camera: &Pose<T>,
    k: &CameraIntrinsics<T>,
) -> Result<DepthImage<T>> {
    Ok(render_meshes(&scene.placed_meshes()?, camera, k))
}

/// Renders many `(scene, camera)` hypotheses; output order matches input.
pub fn render_batch<T: Scalar>(
    hypotheses: &[(SceneGraph<T>, Pose<T>)],
    k: &CameraIntrinsics<T>,
) -> Result<Vec<DepthImage<T>>> {
    hypotheses
        .par_iter()
        .map(|(scene, camera)| render_depth(scene, camera, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Table;
    use std::sync::Arc;

    fn k32() -> CameraIntrinsics<f64> {
        CameraIntrinsics::centered(32, 32, 1.0, 0.1, 10.0).unwrap()
    }

    #[test]
    fn empty_scene_is_all_background() {
        let k = k32();
        let img = render_meshes::<f64>(&[], &Pose::identity(), &k);
        assert!(img.data.iter().all(|&z| z == k.far));
    }

    #[test]
    fn unit_cube_front_face_depth() {
        let k = CameraIntrinsics::<f64>::centered(33, 33, 1.0, 0.1, 10.0).unwrap();
        let cube = TriangleMesh::cuboid(Vector3::repeat(-0.5), Vector3::repeat(0.5));
        let img = render_meshes(&[(&cube, Pose::from_translation(Vector3::new(0.0, 0.0, 2.0)))], &Pose::identity(), &k);
        assert!((img.get(16, 16) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn shared_edges_leave_no_holes() {
        // A quad split along its diagonal, seen face-on, must cover every
        // pixel center strictly inside it exactly once (no gaps).
        let k = CameraIntrinsics::centered(31, 31, 1.0, 0.1, 10.0).unwrap();
        let quad = TriangleMesh::new(
            vec![
                Vector3::new(-0.37, -0.41, 1.0),
                Vector3::new(0.43, -0.29, 1.0),
                Vector3::new(0.31, 0.39, 1.0),
                Vector3::new(-0.33, 0.35, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let img = render_meshes(&[(&quad, Pose::identity())], &Pose::identity(), &k);
        let (u, v) = k.project(&Vector3::new(0.0, 0.0, 1.0));
        assert!((img.get(u as usize, v as usize) - 1.0f64).abs() < 1e-12);
        let holes = (8..23)
            .flat_map(|v| (8..23).map(move |u| (u, v)))
            .filter(|&(u, v)| img.get(u, v) == k.far)
            .count();
        assert_eq!(holes, 0);
    }

    #[test]
    fn near_plane_clipping_keeps_visible_part() {
        let k = k32();
        // Floor-like triangle reaching behind the camera.
        let tri = TriangleMesh::new(
            vec![Vector3::new(-1.0, 0.3, -1.0), Vector3::new(1.0, 0.3, -1.0), Vector3::new(0.0, 0.3, 3.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let img = render_meshes(&[(&tri, Pose::identity())], &Pose::identity(), &k);
        let hits: Vec<_> = img.data.iter().filter(|&&z| z < k.far).collect();
        assert!(!hits.is_empty());
        assert!(hits.iter().all(|&&z| z >= k.near));
    }

    #[test]
    fn batch_matches_sequential() {
        let k = CameraIntrinsics::centered(25, 25, 1.0, 0.05, 4.0).unwrap();
        let table = Arc::new(Table::new(0.4, 0.4));
        let scene = SceneGraph::new(table);
        let cams: Vec<_> = (0..6)
            .map(|i| crate::generative::look_at(0.6 + 0.05 * i as f64, 0.3 * i as f64, 0.8))
            .collect();
        let hyps: Vec<_> = cams.iter().map(|c| (scene.clone(), *c)).collect();
        let batch = render_batch(&hyps, &k).unwrap();
        for ((s, c), img) in hyps.iter().zip(&batch) {
            assert_eq!(&render_depth(s, c, &k).unwrap(), img);
        }
    }

    #[test]
    fn f32_and_f64_agree() {
        let cube = TriangleMesh::cuboid(Vector3::new(-0.2, -0.1, -0.15), Vector3::new(0.2, 0.1, 0.15));
        let pose = Pose::new(
            nalgebra::UnitQuaternion::from_euler_angles(0.4, 0.2, 0.9),
            Vector3::new(0.05, -0.02, 1.2),
        );
        let k = k32();
        let a = render_meshes(&[(&cube, pose)], &Pose::identity(), &k);
        let cube32 = TriangleMesh { vertices: cube.vertices.iter().map(|v| v.cast::<f32>()).collect(), triangles: cube.triangles.clone() };
        let b = render_meshes(&[(&cube32, pose.cast::<f32>())], &Pose::identity(), &k.cast::<f32>());
        let close = a.data.iter().zip(&b.data).filter(|(x, y)| (**x - **y as f64).abs() < 1e-5).count();
        assert!(close >= a.data.len() - 8);
    }
}
