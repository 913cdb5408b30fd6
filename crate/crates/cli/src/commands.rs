//! Subcommand definitions and their file-level behavior.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use scenesmc::formats::{encode_voxels, ChildRecord, SceneRecord};
use scenesmc::inference::{map_particle, normalized_weights, posterior_object_marginal};

use crate::config::{AblateConfig, BenchTrackingConfig, GenerateConfig, InferConfig, LearnConfig, PoseBenchConfig, TrackCmdConfig, TypeBenchConfig};
use crate::dataset::{with_fixed, Dataset};
use crate::error::{CliError, CliResult};
use crate::harness;
use crate::io::{csv_bytes, csv_records, read_json, read_json_data, to_json, write_atomic, write_dir_atomic};

#[derive(Debug, Parser)]
#[command(name = "scenesmc", version, about = "Probabilistic scene parsing, camera tracking and object learning from depth images")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Root of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config; defaults apply to absent keys, unknown keys are errors.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample (observation, ground truth) pairs into a dataset directory.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn a voxel model from an orbit dataset and write it as SVOX.
    Learn {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse every image of a dataset; write summaries and particles.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Track the camera through an orbit dataset; write per-frame CSV.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tracking accuracy and speed over objects and resolutions.
    BenchTracking {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pose accuracy and spin-posterior fits per image.
    PoseBenchmark {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Object-type posteriors per image.
    TypeBenchmark {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confusion matrices of model variants under sensor corruptions.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config<C: DeserializeOwned + Default>(common: &Common) -> CliResult<C> {
    match &common.config {
        Some(p) => read_json(p),
        None => Ok(C::default()),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::Config(format!("--{flag} is required")))
}

/// Loads the config; `Ok(None)` after printing it for `--print-config`.
fn setup<C: DeserializeOwned + Serialize + Default>(common: &Common) -> CliResult<Option<C>> {
    let cfg: C = load_config(common)?;
    if common.print_config {
        print!("{}", String::from_utf8(to_json(&cfg)).expect("JSON is UTF-8"));
        return Ok(None);
    }
    Ok(Some(cfg))
}

/// Summary of one parsed image.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferSummary {
    pub item: usize,
    pub log_evidence: f64,
    pub ess: Vec<f64>,
    pub resampled: Vec<bool>,
    pub map_scene: SceneRecord,
    pub map_noise: [f64; 2],
    pub object_marginal: Vec<f64>,
    pub spin_mu: f64,
    pub spin_kappa: f64,
    pub spin_kappa_saturated: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleRecord {
    pub children: Vec<ChildRecord>,
    pub noise_index: usize,
    pub p_outlier: f64,
    pub sigma: f64,
    pub log_weight: f64,
    pub log_target: f64,
    pub weight: f64,
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // Fails only if a pool already exists (e.g. a second call in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let seed = cli.seed;
    match &cli.command {
        Command::Generate { common, out } => {
            let Some(cfg) = setup::<GenerateConfig>(common)? else { return Ok(()) };
            let out = required(out, "out")?;
            let ds = Dataset::generate(&cfg, seed)?;
            write_dir_atomic(out, |dir| ds.write(dir))?;
            println!("wrote {} items to {}", ds.items.len(), out.display());
        }
        Command::Learn { common, dataset, out } => {
            let Some(cfg) = setup::<LearnConfig>(common)? else { return Ok(()) };
            let ds = Dataset::load(required(dataset, "dataset")?)?;
            let out = required(out, "out")?;
            let frames: Vec<_> = ds.items.iter().map(|it| it.observed.clone()).collect();
            let poses: Vec<_> = ds.items.iter().map(|it| it.camera).collect();
            let model = harness::learn(&frames, &poses, &ds.intrinsics, &cfg, 0)?;
            write_atomic(out, &encode_voxels(&model.grid))?;
            let e = model.extents();
            println!("learned {} voxels, extents {:.3} x {:.3} x {:.3} m", model.grid.len(), e.x, e.y, e.z);
        }
        Command::Infer { common, dataset, out } => {
            let Some(cfg) = setup::<InferConfig>(common)? else { return Ok(()) };
            let ds = Dataset::load(required(dataset, "dataset")?)?;
            let out = required(out, "out")?;
            let grid = harness::noise_grid(&ds, &cfg.inference);
            let mut summaries = Vec::new();
            let mut dumps = Vec::new();
            for (i, it) in ds.items.iter().enumerate() {
                let res = harness::infer(&ds, &it.observed, &it.camera, &cfg.inference, &grid, cfg.objects, seed, i as u64)?;
                let map = map_particle(&res.particles).ok_or_else(|| CliError::Numerical("no finite particle".into()))?;
                let mut map_scene = scenesmc::SceneGraph::new(ds.table.clone());
                map_scene.children = map.children.clone();
                let fit = harness::spin_fit(&res)?;
                summaries.push(InferSummary {
                    item: i,
                    log_evidence: res.log_evidence,
                    ess: res.ess.clone(),
                    resampled: res.resampled.clone(),
                    map_scene: SceneRecord::from_scene(&map_scene),
                    map_noise: [map.noise.p_outlier, map.noise.sigma],
                    object_marginal: posterior_object_marginal(&res.particles, ds.library.len())?,
                    spin_mu: fit.mu,
                    spin_kappa: fit.kappa,
                    spin_kappa_saturated: fit.saturated,
                });
                if cfg.dump_particles {
                    let w = normalized_weights(&res.particles)?;
                    let recs: Vec<ParticleRecord> = res
                        .particles
                        .iter()
                        .zip(w)
                        .map(|(p, weight)| ParticleRecord {
                            children: p.children.iter().map(ChildRecord::from_child).collect(),
                            noise_index: p.noise_index,
                            p_outlier: p.noise.p_outlier,
                            sigma: p.noise.sigma,
                            log_weight: p.log_weight,
                            log_target: p.log_target,
                            weight,
                        })
                        .collect();
                    dumps.push(recs);
                }
            }
            write_dir_atomic(out, |dir| {
                write_atomic(&dir.join("summary.json"), &to_json(&summaries))?;
                for (i, d) in dumps.iter().enumerate() {
                    write_atomic(&dir.join(format!("particles_{i:04}.json")), &to_json(d))?;
                }
                Ok(())
            })?;
            println!("parsed {} images into {}", summaries.len(), out.display());
        }
        Command::Track { common, dataset, out } => {
            let Some(cfg) = setup::<TrackCmdConfig>(common)? else { return Ok(()) };
            let ds = Dataset::load(required(dataset, "dataset")?)?;
            let out = required(out, "out")?;
            let scene = match &cfg.scene {
                Some(path) => {
                    let library = match &cfg.library {
                        Some(l) => l.load()?,
                        None => ds.library.clone(),
                    };
                    let rec: SceneRecord = read_json_data(path)?;
                    rec.to_scene(&library).map_err(|e| CliError::at(path, e))?
                }
                None => {
                    let first = ds.items.first().ok_or_else(|| CliError::Config("dataset has no frames".into()))?;
                    with_fixed(&first.scene, &ds.fixed)
                }
            };
            let rows = harness::track_dataset(&ds, &scene, &cfg)?;
            write_atomic(out, &csv_records(&harness::TRACK_HEADER, &rows))?;
            let n = rows.len().max(1) as f64;
            println!(
                "tracked {} frames: mean position error {:.4} cm, mean orientation error {:.4} deg",
                rows.len(),
                rows.iter().map(|r| r.position_error_cm).sum::<f64>() / n,
                rows.iter().map(|r| r.orientation_error_deg).sum::<f64>() / n
            );
        }
        Command::BenchTracking { common, out } => {
            let Some(cfg) = setup::<BenchTrackingConfig>(common)? else { return Ok(()) };
            let out = required(out, "out")?;
            let rows = harness::bench_tracking(&cfg, seed)?;
            write_atomic(out, &csv_records(&harness::BENCH_TRACK_HEADER, &rows))?;
            for r in &rows {
                println!(
                    "{} {}x{}: {:.4} cm, {:.4} deg, {:.1} fps",
                    r.name, r.width, r.height, r.mean_position_cm, r.mean_orientation_deg, r.fps
                );
            }
        }
        Command::PoseBenchmark { common, dataset, out } => {
            let Some(cfg) = setup::<PoseBenchConfig>(common)? else { return Ok(()) };
            let ds = Dataset::load(required(dataset, "dataset")?)?;
            let out = required(out, "out")?;
            let rows = harness::pose_benchmark(&ds, &cfg, seed)?;
            write_atomic(out, &csv_records(&harness::POSE_HEADER, &rows))?;
            println!("scored {} images", rows.len());
        }
        Command::TypeBenchmark { common, dataset, out } => {
            let Some(cfg) = setup::<TypeBenchConfig>(common)? else { return Ok(()) };
            let ds = Dataset::load(required(dataset, "dataset")?)?;
            let out = required(out, "out")?;
            let rows = harness::type_benchmark(&ds, &cfg, seed)?;
            write_atomic(out, &csv_bytes(&harness::type_header(ds.library.len()), &harness::type_records(&rows)))?;
            for split in ["in_distribution", "out_of_distribution"] {
                let r: Vec<_> = rows.iter().filter(|r| r.split == split).collect();
                if !r.is_empty() {
                    let acc = r.iter().filter(|r| r.predicted() == r.true_object).count() as f64 / r.len() as f64;
                    println!("{split}: accuracy {acc:.3} over {} images", r.len());
                }
            }
        }
        Command::Ablate { common, dataset, out } => {
            let Some(cfg) = setup::<AblateConfig>(common)? else { return Ok(()) };
            let ds = Dataset::load(required(dataset, "dataset")?)?;
            let out = required(out, "out")?;
            let cs = harness::ablate(&ds, &cfg, seed)?;
            write_atomic(out, &csv_bytes(&harness::ablate_header(ds.library.len()), &harness::ablate_records(&cs)))?;
            for c in &cs {
                println!("{} / {}: mean diagonal {:.3}", c.model, c.corruption, c.diagonal_mean());
            }
        }
    }
    Ok(())
}
