//! Rigid transforms, pinhole cameras, depth images, point clouds, voxel
//! grids and triangle meshes.

mod camera;
mod cloud;
mod depth;
mod mesh;
mod pose;
mod voxel;

pub use camera::CameraIntrinsics;
pub use cloud::{transform_cloud, PointCloud};
pub use depth::{cloud_to_depth, depth_to_cloud, DepthImage};
pub use mesh::{voxel_to_mesh, TriangleMesh};
pub use pose::{compose, Pose};
pub use voxel::{bounding_box, voxelize, VoxelGrid, VoxelIndex};
