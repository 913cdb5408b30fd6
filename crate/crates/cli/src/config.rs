//! JSON configuration schema. Every struct rejects unknown keys and every
//! field has a default, so `--print-config` shows the full effective setup.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use scenesmc::formats::{read_voxels, TableRecord};
use scenesmc::generative::CameraPrior;
use scenesmc::inference::{NoiseGrid, Schedule, ScheduleStage, SmcConfig};
use scenesmc::learning::CropBox;
use scenesmc::likelihood::{LikelihoodMode, Prefactor};
use scenesmc::scene::AxisDomain;
use scenesmc::tracking::{OrbitParams, TrackConfig};
use scenesmc::{synth, CameraIntrinsics, ContactDomain, Face, ObjectModel, Table};

use crate::error::{CliError, CliResult};

/// Pinhole camera: centered principal point and `focal_scale · width`
/// focal length unless overridden.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntrinsicsConfig {
    pub width: usize,
    pub height: usize,
    pub focal_scale: f64,
    pub near: f64,
    pub far: f64,
    pub fx: Option<f64>,
    pub fy: Option<f64>,
    pub cx: Option<f64>,
    pub cy: Option<f64>,
}

impl Default for IntrinsicsConfig {
    fn default() -> Self {
        Self { width: 64, height: 64, focal_scale: 1.5, near: 0.05, far: 3.0, fx: None, fy: None, cx: None, cy: None }
    }
}

impl IntrinsicsConfig {
    pub fn square(size: usize, focal_scale: f64) -> Self {
        Self { width: size, height: size, focal_scale, ..Self::default() }
    }

    pub fn build(&self) -> CliResult<CameraIntrinsics<f64>> {
        let c = CameraIntrinsics::centered(self.width, self.height, self.focal_scale, self.near, self.far)?;
        Ok(CameraIntrinsics::new(
            self.fx.unwrap_or(c.fx),
            self.fy.unwrap_or(c.fy),
            self.cx.unwrap_or(c.cx),
            self.cy.unwrap_or(c.cy),
            self.width,
            self.height,
            self.near,
            self.far,
        )?)
    }
}

/// Where object models come from. Object ids are positions in the list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LibrarySource {
    /// The built-in ten-object library, optionally a subset in the given order.
    Synthetic {
        resolution: f64,
        #[serde(default)]
        objects: Option<Vec<usize>>,
    },
    /// A JSON list of `{name, path}` SVOX files, paths relative to the list.
    Manifest { path: PathBuf },
}

impl Default for LibrarySource {
    fn default() -> Self {
        LibrarySource::Synthetic { resolution: 0.01, objects: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryEntry {
    pub name: String,
    pub path: PathBuf,
}

impl LibrarySource {
    pub fn load(&self) -> CliResult<Vec<Arc<ObjectModel<f64>>>> {
        let models = match self {
            LibrarySource::Synthetic { resolution, objects } => {
                let all = synth::library10(*resolution)?;
                match objects {
                    None => all,
                    Some(ids) => ids
                        .iter()
                        .map(|&i| all.get(i).cloned().ok_or_else(|| CliError::Config(format!("no built-in object {i}"))))
                        .collect::<CliResult<_>>()?,
                }
            }
            LibrarySource::Manifest { path } => {
                let entries: Vec<LibraryEntry> = crate::io::read_json(path)?;
                let base = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
                entries
                    .iter()
                    .map(|e| {
                        let file = base.join(&e.path);
                        let grid = read_voxels(&file).map_err(|err| CliError::at(&file, err))?;
                        Ok(ObjectModel::from_grid(0, e.name.clone(), grid)?)
                    })
                    .collect::<CliResult<_>>()?
            }
        };
        if models.is_empty() {
            return Err(CliError::Config("object library is empty".into()));
        }
        Ok(models
            .into_iter()
            .enumerate()
            .map(|(i, mut m)| {
                m.id = i;
                Arc::new(m)
            })
            .collect())
    }
}

/// A box-shaped obstacle placed on the table and known to inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccluderConfig {
    /// Size in voxels.
    pub cells: [i32; 3],
    pub resolution: f64,
    pub face: u8,
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl OccluderConfig {
    pub fn model(&self, id: usize) -> CliResult<ObjectModel<f64>> {
        Ok(synth::block(id, "occluder", self.cells, self.resolution)?)
    }
}

/// Sensor noise of generated observations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// Drawn from the model's noise prior per scene.
    Prior,
    Fixed { p_outlier: f64, sigma: f64 },
}

pub fn default_table() -> TableRecord {
    TableRecord { width: 0.3, depth: 0.3 }
}

pub fn table_of(t: &TableRecord) -> CliResult<Arc<Table<f64>>> {
    if !(t.width > 0.0 && t.depth > 0.0) {
        return Err(CliError::Config(format!("table must have positive size, got {} x {}", t.width, t.depth)));
    }
    Ok(Arc::new(Table::new(t.width, t.depth)))
}

/// Upright objects anywhere on the table, any spin.
pub fn upright_domain() -> ContactDomain {
    ContactDomain { faces: vec![Face::new(1).expect("face 1")], dx: AxisDomain::Full, dy: AxisDomain::Full, dtheta: AxisDomain::Full }
}

/// Independent single-view scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenesConfig {
    pub intrinsics: IntrinsicsConfig,
    pub table: TableRecord,
    pub library: LibrarySource,
    pub scenes: usize,
    pub objects_per_scene: usize,
    /// Scene `i`'s first object is library entry `i mod n` instead of random.
    pub balanced: bool,
    pub domain: ContactDomain,
    pub camera_prior: CameraPrior,
    pub sigma_max: f64,
    pub noise: NoiseSpec,
    pub occluder: Option<OccluderConfig>,
}

impl Default for ScenesConfig {
    fn default() -> Self {
        Self {
            intrinsics: IntrinsicsConfig::default(),
            table: default_table(),
            library: LibrarySource::default(),
            scenes: 10,
            objects_per_scene: 1,
            balanced: false,
            domain: upright_domain(),
            camera_prior: CameraPrior { distance: [0.5, 0.7], azimuth: [0.0, std::f64::consts::TAU], altitude: [0.6, 1.0] },
            sigma_max: 0.02,
            noise: NoiseSpec::Fixed { p_outlier: 0.05, sigma: 0.005 },
            occluder: None,
        }
    }
}

/// A camera circling one upright, centered object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    pub intrinsics: IntrinsicsConfig,
    pub table: TableRecord,
    pub library: LibrarySource,
    pub object: usize,
    pub frames: usize,
    pub orbit: OrbitParams,
    pub noise: Option<NoiseSpec>,
    pub sigma_max: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            intrinsics: IntrinsicsConfig::square(50, 1.0),
            table: default_table(),
            library: LibrarySource::default(),
            object: 5,
            frames: 30,
            orbit: OrbitParams { sweep: 0.5, ..OrbitParams::default() },
            noise: Some(NoiseSpec::Fixed { p_outlier: 0.05, sigma: 0.002 }),
            sigma_max: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenerateConfig {
    Scenes(ScenesConfig),
    Orbit(OrbitConfig),
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig::Scenes(ScenesConfig::default())
    }
}

/// How scenes are scored and sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub smc: SmcConfig,
    /// Candidate noise settings; the standard grid scaled to the dataset's
    /// `sigma_max` when absent.
    pub noise_grid: Option<NoiseGrid>,
    pub likelihood: LikelihoodMode,
    pub prefactor: Prefactor,
    /// Prior support searched by inference; the dataset's when absent.
    pub domain: Option<ContactDomain>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            smc: SmcConfig { particles: 20, ..SmcConfig::default() },
            noise_grid: None,
            likelihood: LikelihoodMode::default(),
            prefactor: Prefactor::default(),
            domain: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    pub inference: InferenceConfig,
    /// Objects inferred per scene.
    pub objects: usize,
    pub dump_particles: bool,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self { inference: InferenceConfig::default(), objects: 1, dump_particles: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseBenchConfig {
    pub inference: InferenceConfig,
    /// Spacing of the enumerated spin posterior; skipped when absent.
    pub grid_resolution_deg: Option<f64>,
}

impl Default for PoseBenchConfig {
    fn default() -> Self {
        Self { inference: InferenceConfig::default(), grid_resolution_deg: Some(1.0) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypeBenchConfig {
    pub inference: InferenceConfig,
    /// Standard deviation (meters) of the planar jitter of the
    /// out-of-distribution split; no such split when absent.
    pub ood_jitter: Option<f64>,
}

impl Default for TypeBenchConfig {
    fn default() -> Self {
        Self { inference: InferenceConfig::default(), ood_jitter: None }
    }
}

/// A sensor corruption applied to clean renders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corruption {
    pub name: String,
    pub p_outlier: f64,
    pub sigma: f64,
}

/// A model variant: a noise grid, or the standard grid when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelVariant {
    pub name: String,
    pub noise_grid: Option<NoiseGrid>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub inference: InferenceConfig,
    pub corruptions: Vec<Corruption>,
    pub models: Vec<ModelVariant>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self {
            inference: InferenceConfig::default(),
            corruptions: vec![
                Corruption { name: "clean".into(), p_outlier: 0.0, sigma: 0.001 },
                Corruption { name: "corrupt".into(), p_outlier: 0.3, sigma: 0.01 },
            ],
            models: vec![
                ModelVariant { name: "hierarchical".into(), noise_grid: None },
                ModelVariant { name: "clamped_low".into(), noise_grid: Some(NoiseGrid::single(0.01, 0.0025)) },
                ModelVariant { name: "clamped_mid".into(), noise_grid: Some(NoiseGrid::single(0.05, 0.005)) },
                ModelVariant { name: "clamped_high".into(), noise_grid: Some(NoiseGrid::single(0.3, 0.01)) },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub crop: CropBox,
    pub resolution: f64,
    pub name: String,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self { crop: CropBox { min: [-0.14, -0.14, 0.001], max: [0.14, 0.14, 1.0] }, resolution: 0.01, name: "learned".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackCmdConfig {
    pub tracker: TrackConfig,
    /// Models the scene file refers to; the dataset's when absent.
    pub library: Option<LibrarySource>,
    /// Scene to track against; the dataset's when absent.
    pub scene: Option<PathBuf>,
    /// Wall-clock timings are written as 0 when false.
    pub record_timing: bool,
}

impl Default for TrackCmdConfig {
    fn default() -> Self {
        Self { tracker: TrackConfig::default(), library: None, scene: None, record_timing: true }
    }
}

/// Views used to learn each object before tracking it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnViews {
    pub views: usize,
    pub size: usize,
    pub focal_scale: f64,
    pub orbit: OrbitParams,
    pub learn: LearnConfig,
}

impl Default for LearnViews {
    fn default() -> Self {
        Self {
            views: 5,
            size: 96,
            focal_scale: 1.0,
            orbit: OrbitParams { distance: 0.6, altitude: 0.7, azimuth_start: 0.0, sweep: std::f64::consts::TAU },
            learn: LearnConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchTrackingConfig {
    /// Built-in object ids.
    pub objects: Vec<usize>,
    pub object_resolution: f64,
    pub resolutions: Vec<usize>,
    pub frames: usize,
    pub focal_scale: f64,
    pub table: TableRecord,
    pub orbit: OrbitParams,
    pub p_outlier: f64,
    pub sigma: f64,
    pub learning: LearnViews,
    pub tracker: TrackConfig,
    pub record_timing: bool,
}

impl Default for BenchTrackingConfig {
    fn default() -> Self {
        Self {
            objects: vec![5, 6, 7],
            object_resolution: 0.01,
            resolutions: vec![25, 50, 100, 200],
            frames: 120,
            focal_scale: 1.0,
            table: default_table(),
            orbit: OrbitParams { distance: 0.6, altitude: 0.8, azimuth_start: 0.0, sweep: 1.0 },
            p_outlier: 0.05,
            sigma: 0.002,
            learning: LearnViews::default(),
            tracker: TrackConfig::default(),
            record_timing: true,
        }
    }
}

/// A coarse-to-fine schedule whose first stage enumerates object, face and
/// noise over `first`, then refines `refinements` times by `factor`.
pub fn schedule(first: [usize; 3], refinements: usize, factor: [usize; 3]) -> Schedule {
    let mut stages = vec![ScheduleStage { subdivisions: first, enumerate_discrete: true }];
    stages.extend((0..refinements).map(|_| ScheduleStage { subdivisions: factor, enumerate_discrete: false }));
    Schedule { stages }
}
