//! The full forward model: scene prior, camera prior, render, sensor noise.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, TAU};
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage, Pose};
use crate::likelihood::{
    log_likelihood, sample_observation, visible_volume, LikelihoodMode, NoiseParams, Prefactor,
};
use crate::render::render_depth;
use crate::scene::{ObjectModel, SceneGraph, ScenePrior, Table};
use crate::Scalar;

/// Camera-to-world pose of a camera at `distance` from the world origin, at
/// the given azimuth (about +z, from +x) and altitude (above the table
/// plane), looking at the origin with its image "up" pointing towards +z.
pub fn look_at<T: Scalar>(distance: T, azimuth: T, altitude: T) -> Pose<T> {
    let eye = Vector3::new(
        distance * altitude.cos() * azimuth.cos(),
        distance * altitude.cos() * azimuth.sin(),
        distance * altitude.sin(),
    );
    let forward = -eye.normalize();
    let right = forward.cross(&Vector3::z()).normalize();
    let down = forward.cross(&right);
    Pose::from_matrix(&Matrix3::from_columns(&[right, down, forward]), eye)
}

/// Inverse of [`look_at`]: `(distance, azimuth in [0, 2π), altitude)` if the
/// pose is a look-at pose within `tol` radians, else `None`.
pub fn decompose_look_at<T: Scalar>(pose: &Pose<T>, tol: f64) -> Option<(f64, f64, f64)> {
    let t = pose.translation.map(|x| x.as_f64());
    let d = t.norm();
    if !(d > 0.0) {
        return None;
    }
    let alt = (t.z / d).clamp(-1.0, 1.0).asin();
    let az = t.y.atan2(t.x).rem_euclid(TAU);
    if alt.abs() >= FRAC_PI_2 - 1e-12 {
        return None;
    }
    let expected = look_at(d, az, alt);
    (pose.cast::<f64>().rotation_angle_to(&expected) <= tol).then_some((d, az, alt))
}

/// Uniform prior over look-at cameras. Intervals are `[lo, hi]` in meters
/// and radians; a zero-length interval pins the coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPrior {
    pub distance: [f64; 2],
    pub azimuth: [f64; 2],
    pub altitude: [f64; 2],
}

impl Default for CameraPrior {
    fn default() -> Self {
        Self { distance: [0.5, 1.5], azimuth: [0.0, TAU], altitude: [FRAC_PI_6, FRAC_PI_3] }
    }
}

impl CameraPrior {
    pub fn fixed(distance: f64, azimuth: f64, altitude: f64) -> Self {
        Self { distance: [distance; 2], azimuth: [azimuth; 2], altitude: [altitude; 2] }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("distance", self.distance), ("azimuth", self.azimuth), ("altitude", self.altitude)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidCameraPrior(format!("{name} interval [{lo}, {hi}]")));
            }
        }
        if !(self.distance[0] > 0.0) {
            return Err(Error::InvalidCameraPrior("distance must be positive".into()));
        }
        if !(self.altitude[0] > 0.0 && self.altitude[1] < FRAC_PI_2) {
            return Err(Error::InvalidCameraPrior("altitude must lie in (0, pi/2)".into()));
        }
        if self.azimuth[1] - self.azimuth[0] > TAU {
            return Err(Error::InvalidCameraPrior("azimuth interval longer than a turn".into()));
        }
        Ok(())
    }

    fn log_volume(&self) -> f64 {
        [self.distance, self.azimuth, self.altitude]
            .iter()
            .map(|[lo, hi]| if hi > lo { (hi - lo).ln() } else { 0.0 })
            .sum()
    }
}

fn draw<R: Rng + ?Sized>([lo, hi]: [f64; 2], rng: &mut R) -> f64 {
    if hi > lo {
        lo + (hi - lo) * rng.gen::<f64>()
    } else {
        lo
    }
}

fn in_interval([lo, hi]: [f64; 2], x: f64) -> bool {
    if hi > lo {
        x >= lo && x <= hi
    } else {
        (x - lo).abs() <= 1e-9
    }
}

pub fn sample_camera_prior<T: Scalar, R: Rng + ?Sized>(cp: &CameraPrior, rng: &mut R) -> Result<Pose<T>> {
    cp.validate()?;
    let d = draw(cp.distance, rng);
    let az = draw(cp.azimuth, rng);
    let alt = draw(cp.altitude, rng);
    Ok(look_at(T::lit(d), T::lit(az), T::lit(alt)))
}

pub fn camera_prior_logpdf<T: Scalar>(cp: &CameraPrior, pose: &Pose<T>) -> f64 {
    let tol = (T::default_epsilon().as_f64() * 100.0).max(1e-9);
    let Some((d, az, alt)) = decompose_look_at(pose, tol) else {
        return f64::NEG_INFINITY;
    };
    let az_ok = [-TAU, 0.0, TAU].iter().any(|k| in_interval(cp.azimuth, az + k));
    if cp.validate().is_err() || !in_interval(cp.distance, d) || !az_ok || !in_interval(cp.altitude, alt) {
        return f64::NEG_INFINITY;
    }
    -cp.log_volume()
}

/// Constants of the generative model.
#[derive(Clone, Debug)]
pub struct SceneModel<T: Scalar> {
    pub intrinsics: CameraIntrinsics<T>,
    pub table: Arc<Table<T>>,
    pub library: Vec<Arc<ObjectModel<T>>>,
    pub prior: ScenePrior,
    pub camera_prior: CameraPrior,
    pub sigma_max: T,
    pub likelihood: LikelihoodMode,
    pub prefactor: Prefactor,
}

impl<T: Scalar> SceneModel<T> {
    /// Unrestricted scene prior over `library`, default camera prior, windowed
    /// likelihood with the printed prefactor.
    pub fn new(intrinsics: CameraIntrinsics<T>, table: Table<T>, library: Vec<ObjectModel<T>>, sigma_max: T) -> Self {
        let prior = ScenePrior::new(library.len(), Default::default());
        Self {
            intrinsics,
            table: Arc::new(table),
            library: library.into_iter().map(Arc::new).collect(),
            prior,
            camera_prior: CameraPrior::default(),
            sigma_max,
            likelihood: LikelihoodMode::default(),
            prefactor: Prefactor::default(),
        }
    }
}

/// One complete draw of the forward model.
#[derive(Clone, Debug)]
pub struct Trace<T: Scalar> {
    pub scene: SceneGraph<T>,
    pub camera: Pose<T>,
    pub noise: NoiseParams<T>,
    pub rendered: DepthImage<T>,
    pub observed: DepthImage<T>,
}

/// Samples a scene with `n` objects, a camera, sensor noise, and the noisy
/// observation, in that order.
pub fn sample_scene_model<T: Scalar, R: Rng + ?Sized>(n: usize, model: &SceneModel<T>, rng: &mut R) -> Result<Trace<T>> {
    if model.library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let mut scene = SceneGraph::new(Arc::clone(&model.table));
    for _ in 0..n {
        let child = model.prior.sample_child(rng, &model.library, &model.table)?;
        scene.children.push(child);
    }
    let camera = sample_camera_prior(&model.camera_prior, rng)?;
    let p_outlier = T::lit(rng.gen::<f64>());
    let sigma = model.sigma_max * T::lit(1.0 - rng.gen::<f64>());
    let noise = NoiseParams::new(p_outlier, sigma)?;
    let rendered = render_depth(&scene, &camera, &model.intrinsics)?;
    let observed = sample_observation(&rendered, &model.intrinsics, &noise, rng)?;
    Ok(Trace { scene, camera, noise, rendered, observed })
}

/// Scene prior + camera prior + likelihood of the observation given the
/// stored render; `-inf` on any support violation.
pub fn joint_logpdf<T: Scalar>(trace: &Trace<T>, model: &SceneModel<T>) -> f64 {
    let scene = model.prior.log_density(&trace.scene);
    let camera = camera_prior_logpdf(&model.camera_prior, &trace.camera);
    let np = &trace.noise;
    let noise_ok = np.p_outlier >= T::zero() && np.p_outlier <= T::one() && np.sigma > T::zero() && np.sigma <= model.sigma_max;
    if !(scene.is_finite() && camera.is_finite() && noise_ok) {
        return f64::NEG_INFINITY;
    }
    let k = &model.intrinsics;
    match log_likelihood(
        &trace.observed,
        &trace.rendered,
        k,
        np,
        visible_volume(k),
        model.sigma_max,
        model.likelihood,
        model.prefactor,
    ) {
        Ok(l) => scene + camera + l.as_f64(),
        Err(_) => f64::NEG_INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> SceneModel<f64> {
        let k = CameraIntrinsics::centered(16, 16, 1.2, 0.05, 4.0).unwrap();
        let lib = vec![synth::block(0, "a", [3, 4, 5], 0.02).unwrap(), synth::mug(1, 0.01).unwrap()];
        let mut m = SceneModel::new(k, Table::new(0.5, 0.4), lib, 0.02);
        m.camera_prior = CameraPrior { distance: [0.6, 0.9], azimuth: [0.0, TAU], altitude: [0.6, 1.1] };
        m
    }

    #[test]
    fn look_at_aims_at_origin() {
        let quarter = std::f64::consts::FRAC_PI_2;
        let cases = [(2.0, 0.0, 0.3), (1.0, 2.5, 1.2), (0.7, 5.9, 0.01), (0.6, quarter, 0.8), (0.6, 3.0 * quarter, 0.8)];
        for &(d, az, alt) in &cases {
            let p = look_at(d, az, alt);
            let p: Pose<f64> = p;
            let axis = p.transform_vector(&Vector3::z());
            let to_origin = -p.translation / d;
            assert!((axis - to_origin).norm() < 1e-9);
            assert!((p.translation.norm() - d).abs() < 1e-9);
            let up = -p.transform_vector(&Vector3::y());
            assert!(up.z > 0.0);
            let (d2, az2, alt2) = decompose_look_at(&p, 1e-9).unwrap();
            assert!((d2 - d).abs() < 1e-9 && (az2 - az).abs() < 1e-9 && (alt2 - alt).abs() < 1e-9);
        }
    }

    #[test]
    fn camera_prior_density() {
        let cp = CameraPrior { distance: [1.0, 2.0], azimuth: [0.0, 1.0], altitude: [0.2, 1.2] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p: Pose<f64> = sample_camera_prior(&cp, &mut rng).unwrap();
        assert!(camera_prior_logpdf(&cp, &p).abs() < 1e-12);
        let off = Pose::from_translation(Vector3::new(0.1, 0.0, 0.0)).compose(&p);
        assert_eq!(camera_prior_logpdf(&cp, &off), f64::NEG_INFINITY);
        let wide = CameraPrior { distance: [1.0, 3.0], ..cp };
        assert!((camera_prior_logpdf(&wide, &p) + 2f64.ln()).abs() < 1e-12);
        let fixed = CameraPrior::fixed(2.0, 0.4, 0.7);
        let q: Pose<f64> = sample_camera_prior(&fixed, &mut rng).unwrap();
        assert!((q.translation.norm() - 2.0).abs() < 1e-9);
        assert_eq!(camera_prior_logpdf(&fixed, &q), 0.0);
    }

    #[test]
    fn invalid_camera_prior() {
        let bad = CameraPrior { altitude: [0.0, 1.0], ..CameraPrior::default() };
        assert!(bad.validate().is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_camera_prior::<f64, _>(&bad, &mut rng).is_err());
    }

    #[test]
    fn traces_are_reproducible_and_supported() {
        let m = model();
        for n in 0..3 {
            let a = sample_scene_model(n, &m, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
            let b = sample_scene_model(n, &m, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
            assert_eq!(a.observed, b.observed);
            assert_eq!(a.scene.children.len(), n);
            assert!(joint_logpdf(&a, &m).is_finite());
            let again = render_depth(&a.scene, &a.camera, &m.intrinsics).unwrap();
            assert_eq!(again, a.rendered);
        }
    }

    #[test]
    fn out_of_range_contact_has_zero_density() {
        let m = model();
        let mut t = sample_scene_model(1, &m, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        t.scene.children[0].contact.dx = 10.0;
        assert_eq!(joint_logpdf(&t, &m), f64::NEG_INFINITY);
    }
}
