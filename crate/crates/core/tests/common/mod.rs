//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::Vector3;
use scenesmc::likelihood::NoiseParams;
use scenesmc::{CameraIntrinsics, DepthImage, PointCloud, Pose, SceneGraph, TriangleMesh};

/// Ray hit distance along `dir` from `orig` (Möller–Trumbore), both faces.
pub fn ray_triangle(orig: Vector3<f64>, dir: Vector3<f64>, tri: [Vector3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = orig - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

/// Ray-cast depth image plus the index of the mesh hit at each pixel.
pub fn raycast(meshes: &[(&TriangleMesh<f64>, Pose<f64>)], camera: &Pose<f64>, k: &CameraIntrinsics<f64>) -> (DepthImage<f64>, Vec<Option<usize>>) {
    let w2c = camera.inverse();
    let tris: Vec<(usize, [Vector3<f64>; 3])> = meshes
        .iter()
        .enumerate()
        .flat_map(|(m, (mesh, pose))| {
            let to_cam = w2c.compose(pose);
            (0..mesh.triangles.len()).map(move |i| (m, mesh.triangle(i).map(|v| to_cam.transform_point(&v))))
        })
        .collect();
    let mut data = vec![k.far; k.width * k.height];
    let mut ids = vec![None; k.width * k.height];
    for v in 0..k.height {
        for u in 0..k.width {
            // Direction with unit z, so the hit distance is the depth.
            let dir = Vector3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
            for (m, tri) in &tris {
                if let Some(z) = ray_triangle(Vector3::zeros(), dir, *tri) {
                    let i = v * k.width + u;
                    if z >= k.near && z < k.far && z < data[i] {
                        data[i] = z;
                        ids[i] = Some(*m);
                    }
                }
            }
        }
    }
    (DepthImage::new(k.width, k.height, data).unwrap(), ids)
}

pub fn raycast_scene(scene: &SceneGraph<f64>, camera: &Pose<f64>, k: &CameraIntrinsics<f64>) -> (DepthImage<f64>, Vec<Option<usize>>) {
    raycast(&scene.placed_meshes().unwrap(), camera, k)
}

/// Pixels whose 8-neighborhood sees a different surface id or a depth jump.
pub fn edge_mask(ids: &[Option<usize>], depth: &DepthImage<f64>, jump: f64) -> Vec<bool> {
    let (w, h) = (depth.width as i64, depth.height as i64);
    let mut out = vec![false; ids.len()];
    for v in 0..h {
        for u in 0..w {
            let i = (v * w + u) as usize;
            'nb: for dv in -1..=1 {
                for du in -1..=1 {
                    let (x, y) = (u + du, v + dv);
                    if x < 0 || y < 0 || x >= w || y >= h {
                        continue;
                    }
                    let j = (y * w + x) as usize;
                    if ids[j] != ids[i] || (depth.data[j] - depth.data[i]).abs() > jump {
                        out[i] = true;
                        break 'nb;
                    }
                }
            }
        }
    }
    out
}

fn gaussian3(q: &Vector3<f64>, m: &Vector3<f64>, sigma: f64) -> f64 {
    let d2 = (q - m).norm_squared();
    (2.0 * std::f64::consts::PI * sigma * sigma).powf(-1.5) * (-d2 / (2.0 * sigma * sigma)).exp()
}

/// The mixture likelihood summed directly, without any rescaling.
pub fn naive_log_likelihood(obs: &PointCloud<f64>, rendered: &PointCloud<f64>, np: &NoiseParams<f64>, vol: f64, log_prefactor: f64) -> f64 {
    let n = rendered.len() as f64;
    let mut total = log_prefactor;
    for q in &obs.points {
        let s: f64 = rendered.points.iter().map(|r| gaussian3(q, r, np.sigma)).sum();
        total += (np.p_outlier / vol + (1.0 - np.p_outlier) / n * s).ln();
    }
    total
}

/// Windowed mixture by brute force: every (observed, rendered) pixel pair,
/// masked to the `(2w+1)²` window.
pub fn masked_log_likelihood(
    obs: &DepthImage<f64>,
    rendered: &DepthImage<f64>,
    k: &CameraIntrinsics<f64>,
    np: &NoiseParams<f64>,
    vol: f64,
    w: usize,
    log_prefactor: f64,
) -> f64 {
    let point = |img: &DepthImage<f64>, u: usize, v: usize| k.backproject(u as f64, v as f64, img.get(u, v));
    let fg = |img: &DepthImage<f64>, u: usize, v: usize| img.get(u, v) < k.far;
    let mut n = 0usize;
    for v in 0..k.height {
        for u in 0..k.width {
            n += fg(rendered, u, v) as usize;
        }
    }
    let mut total = log_prefactor;
    for v in 0..k.height {
        for u in 0..k.width {
            if !fg(obs, u, v) {
                continue;
            }
            let q = point(obs, u, v);
            let mut s = 0.0;
            for rv in 0..k.height {
                for ru in 0..k.width {
                    let inside = ru.abs_diff(u) <= w && rv.abs_diff(v) <= w;
                    if inside && fg(rendered, ru, rv) {
                        s += gaussian3(&q, &point(rendered, ru, rv), np.sigma);
                    }
                }
            }
            total += (np.p_outlier / vol + (1.0 - np.p_outlier) / n as f64 * s).ln();
        }
    }
    total
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub mod fixtures {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use scenesmc::generative::look_at;
    use scenesmc::inference::{NoiseGrid, SceneProblem};
    use scenesmc::likelihood::{sample_observation, LikelihoodMode, NoiseParams, Prefactor};
    use scenesmc::render::render_depth;
    use scenesmc::scene::AxisDomain;
    use scenesmc::{
        synth, CameraIntrinsics, Child, ContactDomain, ContactParams, Face, ObjectModel, SceneGraph, ScenePrior, Table,
    };

    /// One asymmetric object with a 36-value spin lattice, fixed position,
    /// and an unwindowed likelihood on a small image.
    pub fn spin_problem(seed: u64, size: usize) -> (SceneProblem<f64>, NoiseGrid) {
        let mug = Arc::new(synth::mug(0, 0.01).unwrap());
        let table = Arc::new(Table::new(0.3, 0.3));
        let face = Face::new(1).unwrap();
        let rest = face.resting_extents(&mug.extents());
        let (dx, dy) = ((0.3 - rest.x) / 2.0, (0.3 - rest.y) / 2.0);
        let domain = ContactDomain {
            faces: vec![face],
            dx: AxisDomain::Fixed(dx),
            dy: AxisDomain::Fixed(dy),
            dtheta: AxisDomain::Lattice(36),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = rand::Rng::gen_range(&mut rng, 0..36) as f64 * std::f64::consts::TAU / 36.0;
        let child = Child { object: mug.clone(), face, contact: ContactParams::new(dx, dy, truth) };
        let scene = SceneGraph::new(table.clone()).with_child(child);
        let k = CameraIntrinsics::centered(size, size, 1.5, 0.05, 3.0).unwrap();
        let camera = look_at(0.45, 0.3, 0.7);
        let clean = render_depth(&scene, &camera, &k).unwrap();
        let observed = sample_observation(&clean, &k, &NoiseParams::new(0.05, 0.01).unwrap(), &mut rng).unwrap();
        let problem = SceneProblem {
            observed,
            camera,
            intrinsics: k,
            table,
            library: vec![mug],
            fixed: vec![],
            prior: ScenePrior::new(1, domain),
            sigma_max: 0.02,
            likelihood: LikelihoodMode::Full,
            prefactor: Prefactor::Printed,
        };
        (problem, NoiseGrid::product(&[0.05, 0.3], &[0.01, 0.02]))
    }

    /// Two block types with continuous contact axes and two faces.
    pub fn continuous_problem(library: Vec<Arc<ObjectModel<f64>>>) -> SceneProblem<f64> {
        let table = Arc::new(Table::new(0.3, 0.3));
        let k = CameraIntrinsics::centered(16, 16, 1.2, 0.05, 3.0).unwrap();
        let camera = look_at(0.5, 0.9, 0.8);
        let child = Child {
            object: library[0].clone(),
            face: Face::new(1).unwrap(),
            contact: ContactParams::new(0.1, 0.12, 0.4),
        };
        let scene = SceneGraph::new(table.clone()).with_child(child);
        let observed = render_depth(&scene, &camera, &k).unwrap();
        let domain = ContactDomain { faces: vec![Face::new(1).unwrap(), Face::new(3).unwrap()], ..ContactDomain::default() };
        SceneProblem {
            observed,
            camera,
            intrinsics: k,
            table,
            prior: ScenePrior::new(library.len(), domain),
            library,
            fixed: vec![],
            sigma_max: 0.02,
            likelihood: LikelihoodMode::Windowed { radius: 1 },
            prefactor: Prefactor::Printed,
        }
    }
}
