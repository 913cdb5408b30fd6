//! Camera-pose tracking over depth sequences of a known scene.
//!
//! Each frame is searched on a grid of look-at perturbations (azimuth,
//! altitude, distance) around the previous estimate. The best grid point is
//! refined on successively smaller grids.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generative::{decompose_look_at, look_at};
use crate::geometry::{CameraIntrinsics, DepthImage, Pose};
use crate::likelihood::{sample_observation, visible_volume, NoiseParams, Prefactor, WindowedScorer};
use crate::render::render_depth;
use crate::scene::{Child, ContactParams, Face, ObjectModel, SceneGraph, Table};
use crate::Scalar;

/// Position and orientation discrepancy between two poses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub position_cm: f64,
    pub orientation_deg: f64,
}

pub fn pose_error<T: Scalar>(est: &Pose<T>, gt: &Pose<T>) -> PoseError {
    PoseError {
        position_cm: 100.0 * est.translation_distance(gt).as_f64(),
        orientation_deg: est.rotation_angle_to(gt).as_f64().to_degrees(),
    }
}

/// Per-frame search grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Half-width of the azimuth search, degrees.
    pub azimuth_deg: f64,
    /// Half-width of the altitude search, degrees.
    pub altitude_deg: f64,
    /// Half-width of the distance search, meters.
    pub distance: f64,
    /// Grid points per dimension (odd counts include the center).
    pub points_per_dim: usize,
    /// Refinement rounds after the first grid.
    pub refinements: usize,
    /// Factor by which each refinement shrinks the half-widths.
    pub shrink: f64,
    /// Coarse-grid hypotheses refined independently; the best survives.
    pub retain: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { azimuth_deg: 10.0, altitude_deg: 10.0, distance: 0.03, points_per_dim: 5, refinements: 2, shrink: 3.0, retain: 1 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.azimuth_deg >= 0.0
            && self.altitude_deg >= 0.0
            && self.distance >= 0.0
            && self.points_per_dim >= 1
            && self.shrink > 1.0
            && self.retain >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSchedule(format!("invalid tracking search {self:?}")))
        }
    }
}

/// Tracker settings: search grid and the fixed likelihood parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackConfig {
    #[serde(default)]
    pub search: SearchConfig,
    pub p_outlier: f64,
    pub sigma: f64,
    pub sigma_max: f64,
    /// Likelihood window radius; scaled with resolution when absent.
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub prefactor: Prefactor,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self { search: SearchConfig::default(), p_outlier: 0.05, sigma: 0.005, sigma_max: 0.02, window: None, prefactor: Prefactor::Printed }
    }
}

/// Window radius 2 at 100 pixels wide, proportional otherwise, at least 1.
pub fn default_window(width: usize) -> usize {
    ((2.0 * width as f64 / 100.0).round() as usize).max(1)
}

/// Per-frame estimates and timings.
#[derive(Clone, Debug)]
pub struct TrackState<T: Scalar> {
    pub poses: Vec<Pose<T>>,
    pub durations: Vec<Duration>,
}

#[derive(Clone, Copy, Debug)]
struct LookAt {
    distance: f64,
    azimuth: f64,
    altitude: f64,
}

impl LookAt {
    fn pose<T: Scalar>(&self) -> Pose<T> {
        look_at(T::lit(self.distance), T::lit(self.azimuth), T::lit(self.altitude))
    }

    fn valid(&self) -> bool {
        self.distance > 0.0 && self.altitude > 0.0 && self.altitude < std::f64::consts::FRAC_PI_2
    }
}

/// Offsets `-1..=1` in `m` steps, center first so ties keep the center.
fn offsets(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.0];
    }
    let mut v: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect();
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    v
}

struct FrameScorer<'a, T: Scalar> {
    scene: &'a SceneGraph<T>,
    k: &'a CameraIntrinsics<T>,
    scorer: WindowedScorer<T>,
    p_outlier: T,
}

impl<T: Scalar> FrameScorer<'_, T> {
    fn score(&self, c: &LookAt) -> f64 {
        if !c.valid() {
            return f64::NEG_INFINITY;
        }
        let Ok(img) = render_depth(self.scene, &c.pose(), self.k) else {
            return f64::NEG_INFINITY;
        };
        let Ok(sums) = self.scorer.kernel_sums(&img, &[0]) else {
            return f64::NEG_INFINITY;
        };
        self.scorer.log_likelihood(&sums, 0, self.p_outlier).map_or(f64::NEG_INFINITY, |l| l.as_f64())
    }

    /// Scores the grid around `center` with half-widths `h`, best first.
    fn grid(&self, center: LookAt, h: [f64; 3], m: usize) -> Vec<(LookAt, f64)> {
        let o = offsets(m);
        let mut cands = Vec::with_capacity(m * m * m);
        for &a in &o {
            for &b in &o {
                for &c in &o {
                    cands.push(LookAt {
                        azimuth: center.azimuth + a * h[0],
                        altitude: center.altitude + b * h[1],
                        distance: center.distance + c * h[2],
                    });
                }
            }
        }
        let scores: Vec<f64> = cands.par_iter().map(|c| self.score(c)).collect();
        let mut ranked: Vec<(LookAt, f64)> = cands.into_iter().zip(scores).collect();
        // Stable sort keeps enumeration order (center first) among ties.
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked
    }
}

/// Tracks the camera through `frames`, starting from the known pose of the
/// first frame. The likelihood noise is held fixed.
pub fn track_camera<T: Scalar>(
    frames: &[DepthImage<T>],
    scene: &SceneGraph<T>,
    k: &CameraIntrinsics<T>,
    initial: &Pose<T>,
    cfg: &TrackConfig,
) -> Result<TrackState<T>> {
    if frames.is_empty() {
        return Err(Error::NoFrames);
    }
    cfg.search.validate()?;
    let np = NoiseParams::new(T::lit(cfg.p_outlier), T::lit(cfg.sigma))?;
    let (distance, azimuth, altitude) =
        decompose_look_at(initial, 1e-4).ok_or_else(|| Error::InvalidCameraPrior("initial pose is not a look-at pose".into()))?;
    let window = cfg.window.unwrap_or_else(|| default_window(k.width));
    let s = &cfg.search;
    let mut current = LookAt { distance, azimuth, altitude };
    let mut poses = vec![*initial];
    let mut durations = Vec::with_capacity(frames.len());
    durations.push(Duration::ZERO);
    for frame in &frames[1..] {
        let start = Instant::now();
        let scorer = WindowedScorer::new(frame, k, &[np.sigma], window, visible_volume(k), T::lit(cfg.sigma_max), cfg.prefactor)?;
        let fs = FrameScorer { scene, k, scorer, p_outlier: np.p_outlier };
        let h0 = [s.azimuth_deg.to_radians(), s.altitude_deg.to_radians(), s.distance];
        let coarse = fs.grid(current, h0, s.points_per_dim);
        let mut best = coarse[0];
        for &(seed, seed_score) in coarse.iter().take(s.retain) {
            let mut cur = (seed, seed_score);
            let mut h = h0;
            for _ in 0..s.refinements {
                h = h.map(|x| x / s.shrink);
                cur = fs.grid(cur.0, h, s.points_per_dim)[0];
            }
            if cur.1 > best.1 {
                best = cur;
            }
        }
        current = best.0;
        poses.push(current.pose());
        durations.push(start.elapsed().max(Duration::from_nanos(1)));
    }
    Ok(TrackState { poses, durations })
}

/// Camera path for a synthetic sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitParams {
    pub distance: f64,
    pub altitude: f64,
    pub azimuth_start: f64,
    /// Total azimuth swept over the sequence; frame `i` sits at
    /// `azimuth_start + i · sweep / n_frames`.
    pub sweep: f64,
}

impl Default for OrbitParams {
    fn default() -> Self {
        Self { distance: 0.6, altitude: 0.8, azimuth_start: 0.0, sweep: std::f64::consts::TAU }
    }
}

/// `object` resting upright at the center of `table`.
pub fn centered_scene<T: Scalar>(object: Arc<ObjectModel<T>>, table: Arc<Table<T>>) -> Result<SceneGraph<T>> {
    let face = Face::new(1)?;
    let rest = face.resting_extents(&object.extents());
    let half = T::lit(0.5);
    let contact = ContactParams::new((table.width - rest.x) * half, (table.depth - rest.y) * half, T::zero());
    let child = Child { object, face, contact };
    child.world_pose(&table)?;
    Ok(SceneGraph::new(table).with_child(child))
}

/// Renders and corrupts a uniform azimuth sweep around `scene`.
pub fn generate_orbit_sequence<T: Scalar, R: Rng + ?Sized>(
    scene: &SceneGraph<T>,
    k: &CameraIntrinsics<T>,
    n_frames: usize,
    orbit: &OrbitParams,
    np: &NoiseParams<T>,
    rng: &mut R,
) -> Result<(Vec<DepthImage<T>>, Vec<Pose<T>>)> {
    if n_frames == 0 {
        return Err(Error::NoFrames);
    }
    let step = orbit.sweep / n_frames as f64;
    let mut frames = Vec::with_capacity(n_frames);
    let mut poses = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let pose = look_at(T::lit(orbit.distance), T::lit(orbit.azimuth_start + step * i as f64), T::lit(orbit.altitude));
        let clean = render_depth(scene, &pose, k)?;
        frames.push(sample_observation(&clean, k, np, rng)?);
        poses.push(pose);
    }
    Ok((frames, poses))
}
