//! Probabilistic 3D scene perception from depth images.
//!
//! A tabletop scene is a table with objects resting on it, each placed by a
//! contact face and planar offsets. Depth images are explained through a
//! software z-buffer renderer and a robust point-mixture likelihood; scenes
//! are inferred by sequential Monte Carlo with a coarse-to-fine proposal, and
//! camera poses are tracked by grid search around the previous estimate.
//! Object models are voxel grids learned from a few posed depth frames.
//!
//! Geometry and scoring are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the common `f64` instantiation.

pub mod error;
pub mod formats;
pub mod generative;
pub mod geometry;
pub mod inference;
pub mod learning;
pub mod likelihood;
pub mod render;
pub mod scalar;
pub mod scene;
pub mod synth;
pub mod tracking;

pub use error::{Error, Result};
pub use geometry::{
    bounding_box, compose, cloud_to_depth, depth_to_cloud, transform_cloud, voxel_to_mesh, voxelize,
    CameraIntrinsics, DepthImage, PointCloud, Pose, TriangleMesh, VoxelGrid, VoxelIndex,
};
pub use scalar::Scalar;
pub use scene::{
    contact_to_pose, sample_scene_prior, scene_prior_logpdf, Child, ContactDomain, ContactParams, Face,
    ObjectModel, SceneGraph, ScenePrior, Table,
};

pub type Pose64 = Pose<f64>;
pub type Pose32 = Pose<f32>;
pub type Intrinsics64 = CameraIntrinsics<f64>;
pub type Intrinsics32 = CameraIntrinsics<f32>;
pub type DepthImage64 = DepthImage<f64>;
pub type DepthImage32 = DepthImage<f32>;
pub type PointCloud64 = PointCloud<f64>;
pub type VoxelGrid64 = VoxelGrid<f64>;
pub type TriangleMesh64 = TriangleMesh<f64>;
pub type ObjectModel64 = ObjectModel<f64>;
pub type SceneGraph64 = SceneGraph<f64>;
pub type Table64 = Table<f64>;
