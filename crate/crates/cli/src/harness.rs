//! Experiment drivers shared by the subcommands and the acceptance suite.

use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use scenesmc::generative::look_at;
use scenesmc::inference::{
    fit_von_mises, log_sum_exp, map_particle, normalized_weights, posterior_object_marginal, run_smc, von_mises_logpdf,
    NoiseGrid, SceneProblem, SmcResult, Target, VonMisesFit, KAPPA_MAX,
};
use scenesmc::learning::learn_object;
use scenesmc::likelihood::{sample_observation, NoiseParams};
use scenesmc::render::render_depth;
use scenesmc::scene::AxisDomain;
use scenesmc::tracking::{centered_scene, generate_orbit_sequence, pose_error, track_camera};
use scenesmc::{synth, CameraIntrinsics, Child, ContactDomain, ContactParams, DepthImage, ObjectModel, Pose, SceneGraph, ScenePrior};

use crate::config::{AblateConfig, BenchTrackingConfig, InferenceConfig, LearnConfig, LearnViews, PoseBenchConfig, TrackCmdConfig, TypeBenchConfig};
use crate::dataset::{quantize, with_fixed, Dataset};
use crate::error::{CliError, CliResult};
use crate::rng::{sub_rng, unit_rng, Purpose};

pub fn noise_grid(ds: &Dataset, cfg: &InferenceConfig) -> NoiseGrid {
    cfg.noise_grid.clone().unwrap_or_else(|| NoiseGrid::standard(ds.sigma_max))
}

/// Parsing problem for one observation of `ds`'s scene family.
pub fn problem(ds: &Dataset, observed: &DepthImage<f64>, camera: &Pose<f64>, cfg: &InferenceConfig) -> SceneProblem<f64> {
    let domain = cfg.domain.clone().unwrap_or_else(|| ds.domain.clone());
    SceneProblem {
        observed: observed.clone(),
        camera: *camera,
        intrinsics: ds.intrinsics,
        table: ds.table.clone(),
        library: ds.library.clone(),
        fixed: ds.fixed.clone(),
        prior: ScenePrior::new(ds.library.len(), domain),
        sigma_max: ds.sigma_max,
        likelihood: cfg.likelihood,
        prefactor: cfg.prefactor,
    }
}

/// Runs the sampler for `objects` objects with the unit generator `index`.
pub fn infer(
    ds: &Dataset,
    observed: &DepthImage<f64>,
    camera: &Pose<f64>,
    cfg: &InferenceConfig,
    grid: &NoiseGrid,
    objects: usize,
    seed: u64,
    index: u64,
) -> CliResult<SmcResult<f64>> {
    let p = problem(ds, observed, camera, cfg);
    let target = Target::new(&p, grid)?;
    let mut rng = unit_rng(seed, Purpose::Infer, index);
    Ok(run_smc(&target, objects, &cfg.smc, &mut rng)?)
}

/// Weighted von Mises fit of the first object's spin. A posterior collapsed
/// onto one angle reports the concentration bound.
pub fn spin_fit(res: &SmcResult<f64>) -> CliResult<VonMisesFit> {
    let w = normalized_weights(&res.particles)?;
    let angles: Vec<f64> = res.particles.iter().map(|p| p.children[0].contact.dtheta).collect();
    match fit_von_mises(&angles, &w) {
        Err(scenesmc::Error::DegenerateConcentration { mean_direction }) => {
            Ok(VonMisesFit { mu: mean_direction, kappa: KAPPA_MAX, mean_resultant: 1.0, saturated: true })
        }
        other => Ok(other?),
    }
}

/// Posterior over the first object's spin on an even grid, all other
/// latents held at `truth` and the noise marginalized.
pub fn spin_grid_posterior(
    ds: &Dataset,
    observed: &DepthImage<f64>,
    camera: &Pose<f64>,
    truth: &Child<f64>,
    cfg: &InferenceConfig,
    grid: &NoiseGrid,
    resolution_deg: f64,
) -> CliResult<(Vec<f64>, Vec<f64>)> {
    if !(resolution_deg > 0.0) {
        return Err(CliError::Config("grid resolution must be positive".into()));
    }
    let n = (360.0 / resolution_deg).round().max(1.0) as usize;
    let domain = ContactDomain {
        faces: vec![truth.face],
        dx: AxisDomain::Fixed(truth.contact.dx),
        dy: AxisDomain::Fixed(truth.contact.dy),
        dtheta: AxisDomain::Full,
    };
    let mut p = problem(ds, observed, camera, cfg);
    p.prior = ScenePrior::new(ds.library.len(), domain);
    let target = Target::new(&p, grid)?;
    let angles: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
    let logs: Vec<f64> = angles
        .par_iter()
        .map(|&a| {
            let child = Child { contact: ContactParams::new(truth.contact.dx, truth.contact.dy, a), ..truth.clone() };
            Ok(log_sum_exp(target.log_targets(&[child])?))
        })
        .collect::<CliResult<_>>()?;
    let z = log_sum_exp(logs.iter().copied());
    if !z.is_finite() {
        return Err(CliError::Numerical("spin posterior has no mass".into()));
    }
    Ok((angles, logs.iter().map(|l| (l - z).exp()).collect()))
}

/// `-Σ p_j log(q(θ_j) Δθ)`: cross entropy of the gridded posterior against
/// the von Mises fit, discretized on the same grid.
pub fn cross_entropy(angles: &[f64], probs: &[f64], fit: &VonMisesFit) -> f64 {
    let cell = (TAU / angles.len() as f64).ln();
    -angles.iter().zip(probs).filter(|(_, p)| **p > 0.0).map(|(a, p)| p * (von_mises_logpdf(*a, fit.mu, fit.kappa) + cell)).sum::<f64>()
}

pub const POSE_HEADER: [&str; 12] = [
    "item",
    "true_object",
    "map_object",
    "position_error_cm",
    "orientation_error_deg",
    "mu",
    "kappa",
    "kappa_saturated",
    "grid_kappa",
    "cross_entropy",
    "log_evidence",
    "ess",
];

#[derive(Clone, Debug, Serialize)]
pub struct PoseRow {
    pub item: usize,
    pub true_object: usize,
    pub map_object: usize,
    pub position_error_cm: f64,
    pub orientation_error_deg: f64,
    pub mu: f64,
    pub kappa: f64,
    pub kappa_saturated: bool,
    pub grid_kappa: Option<f64>,
    pub cross_entropy: Option<f64>,
    pub log_evidence: f64,
    pub ess: f64,
}

/// Per image: infer one object, compare the MAP pose with the truth, fit a
/// von Mises to the spin samples, and score it against the gridded posterior.
pub fn pose_benchmark(ds: &Dataset, cfg: &PoseBenchConfig, seed: u64) -> CliResult<Vec<PoseRow>> {
    let grid = noise_grid(ds, &cfg.inference);
    ds.items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let truth = it.scene.children.first().ok_or_else(|| CliError::Config(format!("item {i} has no object")))?;
            let res = infer(ds, &it.observed, &it.camera, &cfg.inference, &grid, 1, seed, i as u64)?;
            let map = map_particle(&res.particles).ok_or_else(|| CliError::Numerical("no finite particle".into()))?;
            let est = &map.children[0];
            let err = pose_error(&est.world_pose(&ds.table)?, &truth.world_pose(&ds.table)?);
            let fit = spin_fit(&res)?;
            let (grid_kappa, ce) = match cfg.grid_resolution_deg {
                Some(r) => {
                    let (a, p) = spin_grid_posterior(ds, &it.observed, &it.camera, truth, &cfg.inference, &grid, r)?;
                    let g = fit_von_mises(&a, &p).map(|f| f.kappa).unwrap_or(KAPPA_MAX);
                    (Some(g), Some(cross_entropy(&a, &p, &fit)))
                }
                None => (None, None),
            };
            Ok(PoseRow {
                item: i,
                true_object: truth.object.id,
                map_object: est.object.id,
                position_error_cm: err.position_cm,
                orientation_error_deg: err.orientation_deg,
                mu: fit.mu,
                kappa: fit.kappa,
                kappa_saturated: fit.saturated,
                grid_kappa,
                cross_entropy: ce,
                log_evidence: res.log_evidence,
                ess: *res.ess.last().unwrap_or(&0.0),
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TypeRow {
    pub split: &'static str,
    pub item: usize,
    pub true_object: usize,
    pub marginal: Vec<f64>,
}

impl TypeRow {
    pub fn predicted(&self) -> usize {
        argmax(&self.marginal)
    }
}

fn argmax(xs: &[f64]) -> usize {
    xs.iter().enumerate().fold(0, |best, (i, x)| if *x > xs[best] { i } else { best })
}

/// Planar jitter of the first object, kept on the table.
fn jittered<R: Rng + ?Sized>(ds: &Dataset, scene: &SceneGraph<f64>, sd: f64, rng: &mut R) -> CliResult<SceneGraph<f64>> {
    let normal = Normal::new(0.0, sd).map_err(|e| CliError::Config(format!("jitter: {e}")))?;
    let mut s = scene.clone();
    let c = &mut s.children[0];
    let rest = c.face.resting_extents(&c.object.extents());
    let (wx, wy) = (ds.table.width - rest.x, ds.table.depth - rest.y);
    c.contact.dx = (c.contact.dx + normal.sample(rng)).clamp(0.0, wx);
    c.contact.dy = (c.contact.dy + normal.sample(rng)).clamp(0.0, wy);
    Ok(s)
}

/// Object-type marginal per image; with `ood_jitter`, a second split
/// re-renders each scene with the object's position perturbed.
pub fn type_benchmark(ds: &Dataset, cfg: &TypeBenchConfig, seed: u64) -> CliResult<Vec<TypeRow>> {
    let grid = noise_grid(ds, &cfg.inference);
    let k = ds.library.len();
    let mut rows = Vec::new();
    for (i, it) in ds.items.iter().enumerate() {
        let truth = it.scene.children.first().ok_or_else(|| CliError::Config(format!("item {i} has no object")))?;
        let res = infer(ds, &it.observed, &it.camera, &cfg.inference, &grid, 1, seed, i as u64)?;
        rows.push(TypeRow { split: "in_distribution", item: i, true_object: truth.object.id, marginal: posterior_object_marginal(&res.particles, k)? });
    }
    if let Some(sd) = cfg.ood_jitter {
        for (i, it) in ds.items.iter().enumerate() {
            let mut rng = unit_rng(seed, Purpose::Jitter, i as u64);
            let scene = jittered(ds, &it.scene, sd, &mut rng)?;
            let clean = render_depth(&with_fixed(&scene, &ds.fixed), &it.camera, &ds.intrinsics)?;
            let observed = quantize(sample_observation(&clean, &ds.intrinsics, &it.noise, &mut rng)?);
            let res = infer(ds, &observed, &it.camera, &cfg.inference, &grid, 1, seed, i as u64)?;
            rows.push(TypeRow {
                split: "out_of_distribution",
                item: i,
                true_object: scene.children[0].object.id,
                marginal: posterior_object_marginal(&res.particles, k)?,
            });
        }
    }
    Ok(rows)
}

pub fn type_header(library_size: usize) -> Vec<String> {
    let mut h = vec!["split".to_string(), "item".into(), "true_object".into()];
    h.extend((0..library_size).map(|j| format!("p_{j}")));
    h.extend(["predicted".to_string(), "correct".into()]);
    h
}

pub fn type_records(rows: &[TypeRow]) -> Vec<Vec<String>> {
    use crate::io::fmt_f64;
    rows.iter()
        .map(|r| {
            let mut v = vec![r.split.to_string(), r.item.to_string(), r.true_object.to_string()];
            v.extend(r.marginal.iter().map(|p| fmt_f64(*p)));
            v.extend([r.predicted().to_string(), ((r.predicted() == r.true_object) as u8).to_string()]);
            v
        })
        .collect()
}

/// Confusion matrices: for each model and corruption, row `i` is the mean
/// identity posterior over the images whose object is `i`.
#[derive(Clone, Debug)]
pub struct Confusion {
    pub model: String,
    pub corruption: String,
    pub matrix: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl Confusion {
    /// Mean diagonal over the rows that have at least one image.
    pub fn diagonal_mean(&self) -> f64 {
        let rows: Vec<usize> = (0..self.matrix.len()).filter(|&i| self.counts[i] > 0).collect();
        rows.iter().map(|&i| self.matrix[i][i]).sum::<f64>() / rows.len().max(1) as f64
    }

    /// Every populated row peaks on its diagonal.
    pub fn diagonal_dominant(&self) -> bool {
        (0..self.matrix.len()).filter(|&i| self.counts[i] > 0).all(|i| argmax(&self.matrix[i]) == i)
    }
}

pub fn ablate(ds: &Dataset, cfg: &AblateConfig, seed: u64) -> CliResult<Vec<Confusion>> {
    let k = ds.library.len();
    let mut out = Vec::new();
    for (ci, c) in cfg.corruptions.iter().enumerate() {
        let np = NoiseParams::new(c.p_outlier, c.sigma)?;
        let observed: Vec<DepthImage<f64>> = ds
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| {
                let mut rng = sub_rng(seed, Purpose::Corrupt, i as u64, ci as u64);
                Ok(quantize(sample_observation(&it.rendered, &ds.intrinsics, &np, &mut rng)?))
            })
            .collect::<CliResult<_>>()?;
        for m in &cfg.models {
            let grid = m.noise_grid.clone().unwrap_or_else(|| NoiseGrid::standard(ds.sigma_max));
            let mut matrix = vec![vec![0.0; k]; k];
            let mut counts = vec![0; k];
            for (i, (it, obs)) in ds.items.iter().zip(&observed).enumerate() {
                let truth = it.scene.children.first().ok_or_else(|| CliError::Config(format!("item {i} has no object")))?;
                let res = infer(ds, obs, &it.camera, &cfg.inference, &grid, 1, seed, i as u64)?;
                let marginal = posterior_object_marginal(&res.particles, k)?;
                let row = truth.object.id;
                counts[row] += 1;
                for (a, b) in matrix[row].iter_mut().zip(&marginal) {
                    *a += b;
                }
            }
            for (row, n) in matrix.iter_mut().zip(&counts) {
                if *n > 0 {
                    row.iter_mut().for_each(|x| *x /= *n as f64);
                }
            }
            out.push(Confusion { model: m.name.clone(), corruption: c.name.clone(), matrix, counts });
        }
    }
    Ok(out)
}

pub fn ablate_header(library_size: usize) -> Vec<String> {
    let mut h = vec!["model".to_string(), "corruption".into(), "true_object".into(), "images".into()];
    h.extend((0..library_size).map(|j| format!("p_{j}")));
    h
}

pub fn ablate_records(cs: &[Confusion]) -> Vec<Vec<String>> {
    use crate::io::fmt_f64;
    cs.iter()
        .flat_map(|c| {
            c.matrix.iter().enumerate().map(move |(i, row)| {
                let mut v = vec![c.model.clone(), c.corruption.clone(), i.to_string(), c.counts[i].to_string()];
                v.extend(row.iter().map(|p| fmt_f64(*p)));
                v
            })
        })
        .collect()
}

/// Learns a model of `truth` from noiseless renders around it.
pub fn learn_from_views(truth: Arc<ObjectModel<f64>>, table: Arc<scenesmc::Table<f64>>, v: &LearnViews) -> CliResult<ObjectModel<f64>> {
    if v.views == 0 {
        return Err(CliError::Config("at least one learning view is required".into()));
    }
    let k = CameraIntrinsics::centered(v.size, v.size, v.focal_scale, 0.05, 3.0)?;
    let scene = centered_scene(truth.clone(), table)?;
    let step = v.orbit.sweep / v.views as f64;
    let poses: Vec<Pose<f64>> =
        (0..v.views).map(|i| look_at(v.orbit.distance, v.orbit.azimuth_start + step * i as f64, v.orbit.altitude)).collect();
    let frames = poses.iter().map(|p| render_depth(&scene, p, &k)).collect::<scenesmc::Result<Vec<_>>>()?;
    learn(&frames, &poses, &k, &v.learn, truth.id)
}

pub fn learn(frames: &[DepthImage<f64>], poses: &[Pose<f64>], k: &CameraIntrinsics<f64>, cfg: &LearnConfig, id: usize) -> CliResult<ObjectModel<f64>> {
    Ok(learn_object(frames, poses, k, &cfg.crop, cfg.resolution, id, &cfg.name)?)
}

pub const TRACK_HEADER: [&str; 11] = [
    "frame_index",
    "position_error_cm",
    "orientation_error_deg",
    "frame_ms",
    "x",
    "y",
    "z",
    "qw",
    "qx",
    "qy",
    "qz",
];

#[derive(Clone, Debug, Serialize)]
pub struct TrackRow {
    pub frame_index: usize,
    pub position_error_cm: f64,
    pub orientation_error_deg: f64,
    pub frame_ms: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
}

fn millis(d: Duration, record: bool) -> f64 {
    if record {
        d.as_secs_f64() * 1e3
    } else {
        0.0
    }
}

/// Tracks the dataset's frames from the first frame's true pose.
pub fn track_dataset(ds: &Dataset, scene: &SceneGraph<f64>, cfg: &TrackCmdConfig) -> CliResult<Vec<TrackRow>> {
    let frames: Vec<DepthImage<f64>> = ds.items.iter().map(|it| it.observed.clone()).collect();
    let first = ds.items.first().ok_or_else(|| CliError::Config("dataset has no frames".into()))?;
    let state = track_camera(&frames, scene, &ds.intrinsics, &first.camera, &cfg.tracker)?;
    Ok(state
        .poses
        .iter()
        .zip(&state.durations)
        .zip(&ds.items)
        .enumerate()
        .map(|(i, ((p, d), it))| {
            let e = pose_error(p, &it.camera);
            let [qw, qx, qy, qz] = p.quaternion_wxyz();
            let t = p.translation;
            TrackRow {
                frame_index: i,
                position_error_cm: e.position_cm,
                orientation_error_deg: e.orientation_deg,
                frame_ms: millis(*d, cfg.record_timing),
                x: t.x,
                y: t.y,
                z: t.z,
                qw,
                qx,
                qy,
                qz,
            }
        })
        .collect())
}

pub const BENCH_TRACK_HEADER: [&str; 10] = [
    "object",
    "name",
    "width",
    "height",
    "frames",
    "mean_position_cm",
    "mean_orientation_deg",
    "max_position_cm",
    "max_orientation_deg",
    "fps",
];

#[derive(Clone, Debug, Serialize)]
pub struct BenchTrackRow {
    pub object: usize,
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub mean_position_cm: f64,
    pub mean_orientation_deg: f64,
    pub max_position_cm: f64,
    pub max_orientation_deg: f64,
    /// Frames tracked per second of search time, excluding the given first frame.
    pub fps: f64,
}

/// Learn each object from a few views, then track a noisy orbit around the
/// true object at every resolution using the learned model.
pub fn bench_tracking(cfg: &BenchTrackingConfig, seed: u64) -> CliResult<Vec<BenchTrackRow>> {
    let all = synth::library10(cfg.object_resolution)?;
    let table = crate::config::table_of(&cfg.table)?;
    let np = NoiseParams::new(cfg.p_outlier, cfg.sigma)?;
    let mut rows = Vec::new();
    for (oi, &id) in cfg.objects.iter().enumerate() {
        let truth = Arc::new(all.get(id).cloned().ok_or_else(|| CliError::Config(format!("no built-in object {id}")))?);
        let learned = Arc::new(learn_from_views(truth.clone(), table.clone(), &cfg.learning)?);
        let true_scene = centered_scene(truth.clone(), table.clone())?;
        let model_scene = centered_scene(learned, table.clone())?;
        for (ri, &size) in cfg.resolutions.iter().enumerate() {
            let k = CameraIntrinsics::centered(size, size, cfg.focal_scale, 0.05, 3.0)?;
            let unit = (oi * cfg.resolutions.len() + ri) as u64;
            let mut rng = unit_rng(seed, Purpose::Track, unit);
            let (frames, poses) = generate_orbit_sequence(&true_scene, &k, cfg.frames, &cfg.orbit, &np, &mut rng)?;
            let state = track_camera(&frames, &model_scene, &k, &poses[0], &cfg.tracker)?;
            let errs: Vec<_> = state.poses.iter().zip(&poses).map(|(e, g)| pose_error(e, g)).collect();
            let n = errs.len() as f64;
            let busy: f64 = state.durations.iter().map(Duration::as_secs_f64).sum();
            let fps = if cfg.record_timing && busy > 0.0 { (errs.len() - 1) as f64 / busy } else { 0.0 };
            rows.push(BenchTrackRow {
                object: id,
                name: truth.name.clone(),
                width: size,
                height: size,
                frames: cfg.frames,
                mean_position_cm: errs.iter().map(|e| e.position_cm).sum::<f64>() / n,
                mean_orientation_deg: errs.iter().map(|e| e.orientation_deg).sum::<f64>() / n,
                max_position_cm: errs.iter().map(|e| e.position_cm).fold(0.0, f64::max),
                max_orientation_deg: errs.iter().map(|e| e.orientation_deg).fold(0.0, f64::max),
                fps,
            });
        }
    }
    Ok(rows)
}
