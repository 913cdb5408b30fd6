//! Generated datasets: in-memory form, on-disk layout, and replay.
//!
//! A dataset directory holds `manifest.json` (seed, generating config, one
//! record per item) and, per item `i`, `observed_i.sdpt`, `rendered_i.sdpt`,
//! `scene_i.json` and `camera_i.json`. Images are stored as `f32`; the
//! in-memory dataset is rounded the same way so both forms score alike.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use scenesmc::formats::{encode_depth, read_depth, PoseRecord, SceneRecord};
use scenesmc::generative::sample_camera_prior;
use scenesmc::likelihood::{sample_observation, NoiseParams};
use scenesmc::render::render_depth;
use scenesmc::tracking::{centered_scene, generate_orbit_sequence};
use scenesmc::{CameraIntrinsics, Child, ContactDomain, DepthImage, Face, ObjectModel, Pose, SceneGraph, ScenePrior, Table};

use crate::config::{table_of, GenerateConfig, NoiseSpec, OccluderConfig, OrbitConfig, ScenesConfig};
use crate::error::{CliError, CliResult};
use crate::io::{read_json, read_json_data, to_json, write_atomic};
use crate::rng::{unit_rng, Purpose};

/// One (observation, ground truth) pair.
#[derive(Clone, Debug)]
pub struct Item {
    pub scene: SceneGraph<f64>,
    pub camera: Pose<f64>,
    pub noise: NoiseParams<f64>,
    pub rendered: DepthImage<f64>,
    pub observed: DepthImage<f64>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub seed: u64,
    pub config: GenerateConfig,
    pub intrinsics: CameraIntrinsics<f64>,
    pub table: Arc<Table<f64>>,
    pub library: Vec<Arc<ObjectModel<f64>>>,
    /// Known static objects, rendered into every item but not inferred.
    pub fixed: Vec<Child<f64>>,
    pub domain: ContactDomain,
    pub sigma_max: f64,
    pub items: Vec<Item>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemRecord {
    pub index: usize,
    /// Generator stream of this item under the dataset seed.
    pub stream: u64,
    pub observed: String,
    pub rendered: String,
    pub scene: String,
    pub camera: String,
    pub p_outlier: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub seed: u64,
    pub config: GenerateConfig,
    pub items: Vec<ItemRecord>,
}

/// Rounds every depth to `f32`, the storage precision.
pub fn quantize(img: DepthImage<f64>) -> DepthImage<f64> {
    DepthImage { data: img.data.iter().map(|&x| x as f32 as f64).collect(), ..img }
}

fn fixed_children(occ: &Option<OccluderConfig>, table: &Table<f64>, id: usize) -> CliResult<Vec<Child<f64>>> {
    let Some(o) = occ else { return Ok(Vec::new()) };
    let rec = scenesmc::formats::ChildRecord { object: 0, face: o.face, dx: o.dx, dy: o.dy, dtheta: o.dtheta };
    Ok(vec![rec.to_child(&[Arc::new(o.model(id)?)], table)?])
}

/// Full scene (inferred objects plus fixed ones) for rendering.
pub fn with_fixed(scene: &SceneGraph<f64>, fixed: &[Child<f64>]) -> SceneGraph<f64> {
    let mut s = scene.clone();
    s.children.extend(fixed.iter().cloned());
    s
}

fn noise_of<R: Rng + ?Sized>(spec: NoiseSpec, sigma_max: f64, rng: &mut R) -> CliResult<NoiseParams<f64>> {
    Ok(match spec {
        NoiseSpec::Prior => NoiseParams::new(rng.gen::<f64>(), sigma_max * (1.0 - rng.gen::<f64>()))?,
        NoiseSpec::Fixed { p_outlier, sigma } => NoiseParams::new(p_outlier, sigma)?,
    })
}

impl Dataset {
    /// Draws every item; item `i` uses stream `i` of the generation seed.
    pub fn generate(config: &GenerateConfig, seed: u64) -> CliResult<Self> {
        match config {
            GenerateConfig::Scenes(c) => Self::scenes(config, c, seed),
            GenerateConfig::Orbit(c) => Self::orbit(config, c, seed),
        }
    }

    fn scenes(config: &GenerateConfig, c: &ScenesConfig, seed: u64) -> CliResult<Self> {
        let k = c.intrinsics.build()?;
        let table = table_of(&c.table)?;
        let library = c.library.load()?;
        c.domain.validate()?;
        c.camera_prior.validate()?;
        if !(c.sigma_max > 0.0) {
            return Err(CliError::Config("sigma_max must be positive".into()));
        }
        let fixed = fixed_children(&c.occluder, &table, library.len())?;
        let prior = ScenePrior::new(library.len(), c.domain.clone());
        let items = (0..c.scenes)
            .map(|i| {
                let mut rng = unit_rng(seed, Purpose::Generate, i as u64);
                let mut scene = SceneGraph::new(table.clone());
                for j in 0..c.objects_per_scene {
                    // Balanced sets cycle the first object through the library.
                    let pool = if c.balanced && j == 0 { &library[i % library.len()..][..1] } else { &library[..] };
                    scene.children.push(prior.sample_child(&mut rng, pool, &table)?);
                }
                let camera = sample_camera_prior(&c.camera_prior, &mut rng)?;
                let noise = noise_of(c.noise, c.sigma_max, &mut rng)?;
                let rendered = quantize(render_depth(&with_fixed(&scene, &fixed), &camera, &k)?);
                let observed = quantize(sample_observation(&rendered, &k, &noise, &mut rng)?);
                Ok(Item { scene, camera, noise, rendered, observed })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(Self {
            seed,
            config: config.clone(),
            intrinsics: k,
            table,
            library,
            fixed,
            domain: c.domain.clone(),
            sigma_max: c.sigma_max,
            items,
        })
    }

    fn orbit(config: &GenerateConfig, c: &OrbitConfig, seed: u64) -> CliResult<Self> {
        let k = c.intrinsics.build()?;
        let table = table_of(&c.table)?;
        let library = c.library.load()?;
        let object = library.get(c.object).cloned().ok_or_else(|| CliError::Config(format!("no object {} in the library", c.object)))?;
        let scene = centered_scene(object, table.clone())?;
        let mut rng = unit_rng(seed, Purpose::Generate, 0);
        // Noiseless frames still go through the sampler so the layout is uniform.
        let noise = match c.noise {
            Some(spec) => noise_of(spec, c.sigma_max, &mut rng)?,
            None => NoiseParams::new(0.0, c.sigma_max)?,
        };
        let items = if c.frames == 0 {
            Vec::new()
        } else {
            let (frames, poses) = generate_orbit_sequence(&scene, &k, c.frames, &c.orbit, &noise, &mut rng)?;
            frames
                .into_iter()
                .zip(poses)
                .map(|(f, camera)| {
                    let rendered = quantize(render_depth(&scene, &camera, &k)?);
                    let observed = if c.noise.is_some() { quantize(f) } else { rendered.clone() };
                    Ok(Item { scene: scene.clone(), camera, noise, rendered, observed })
                })
                .collect::<CliResult<Vec<_>>>()?
        };
        let domain = ContactDomain { faces: vec![Face::new(1)?], ..ContactDomain::default() };
        Ok(Self { seed, config: config.clone(), intrinsics: k, table, library, fixed: Vec::new(), domain, sigma_max: c.sigma_max, items })
    }

    pub fn manifest(&self) -> Manifest {
        let orbit = matches!(self.config, GenerateConfig::Orbit(_));
        let items = self
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| ItemRecord {
                index: i,
                stream: if orbit { 0 } else { i as u64 },
                observed: format!("observed_{i:04}.sdpt"),
                rendered: format!("rendered_{i:04}.sdpt"),
                scene: format!("scene_{i:04}.json"),
                camera: format!("camera_{i:04}.json"),
                p_outlier: it.noise.p_outlier,
                sigma: it.noise.sigma,
            })
            .collect();
        Manifest { seed: self.seed, config: self.config.clone(), items }
    }

    /// Writes the manifest and every item file into `dir`.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let m = self.manifest();
        for (it, rec) in self.items.iter().zip(&m.items) {
            write_atomic(&dir.join(&rec.observed), &encode_depth(&it.observed))?;
            write_atomic(&dir.join(&rec.rendered), &encode_depth(&it.rendered))?;
            write_atomic(&dir.join(&rec.scene), &to_json(&SceneRecord::from_scene(&it.scene)))?;
            write_atomic(&dir.join(&rec.camera), &to_json(&PoseRecord::from_pose(&it.camera)))?;
        }
        write_atomic(&dir.join("manifest.json"), &to_json(&m))
    }

    /// Loads a dataset directory written by [`Dataset::write`].
    pub fn load(dir: &Path) -> CliResult<Self> {
        let m: Manifest = read_json(&dir.join("manifest.json"))?;
        // Rebuild the constants (library, camera, occluders) from the config
        // without drawing any items.
        let mut empty = m.config.clone();
        match &mut empty {
            GenerateConfig::Scenes(c) => c.scenes = 0,
            GenerateConfig::Orbit(c) => c.frames = 0,
        }
        let mut ds = Self::generate(&empty, m.seed)?;
        ds.config = m.config.clone();
        let k = ds.intrinsics;
        for rec in &m.items {
            let depth = |name: &str| -> CliResult<DepthImage<f64>> {
                let path = dir.join(name);
                let img: DepthImage<f64> = read_depth(&path).map_err(|e| CliError::at(&path, e))?;
                if img.width != k.width || img.height != k.height {
                    return Err(CliError::Data { path, reason: format!("image is {}x{}, expected {}x{}", img.width, img.height, k.width, k.height) });
                }
                Ok(img)
            };
            let scene_path = dir.join(&rec.scene);
            let scene_rec: SceneRecord = read_json_data(&scene_path)?;
            let scene = scene_rec.to_scene(&ds.library).map_err(|e| CliError::at(&scene_path, e))?;
            let cam_path = dir.join(&rec.camera);
            let camera = read_json_data::<PoseRecord>(&cam_path)?.to_pose().map_err(|e| CliError::at(&cam_path, e))?;
            ds.items.push(Item {
                scene,
                camera,
                noise: NoiseParams::new(rec.p_outlier, rec.sigma)?,
                rendered: depth(&rec.rendered)?,
                observed: depth(&rec.observed)?,
            });
        }
        Ok(ds)
    }
}
