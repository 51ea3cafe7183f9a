//! Geometry, splat, rendering and kinematics core for the hybrid real-to-sim
//! toolkit.

pub mod align;
pub mod cloud;
pub mod kinematics;
pub mod mesh;
pub mod render;
pub mod spatial;
pub mod splat;
pub mod transform;

pub use cloud::PointCloud;
pub use mesh::TriMesh;
pub use splat::{GaussianSplat, ShCoefficients, SplatSet};
pub use transform::{RigidPose, Sim3, SymMat3, Vec3};
