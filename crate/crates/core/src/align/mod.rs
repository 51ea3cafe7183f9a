//! Similarity estimation, camera-pose updating, hand-eye calibration and
//! mesh surface sampling.

mod hand_eye;
mod icp;
mod umeyama;

pub use hand_eye::{hand_eye_tsai_lenz, motion_pairs, HandEyeMode, HandEyeSolution, MotionPair, Station};
pub use icp::{scaled_icp, IcpParams, IcpResult};
pub use umeyama::umeyama_sim3;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::mesh::TriMesh;
use crate::transform::{RigidPose, Sim3, TransformError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("need at least 3 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("source has {src} points but destination has {dst}")]
    LengthMismatch { src: usize, dst: usize },
    #[error("degenerate (collinear) correspondences: spread ratio {condition:.3e}")]
    Degenerate { condition: f64 },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("no correspondences within {gate} m of the initial transform (bad init?)")]
    NoCorrespondences { gate: f64 },
    #[error("invalid ICP parameters: {0}")]
    InvalidParams(&'static str),
    #[error("need at least 2 motion pairs, got {0}")]
    InsufficientMotions(usize),
    #[error("motion axes are degenerate: rank condition {condition:.3e}")]
    DegenerateMotions { condition: f64 },
    #[error("mesh has no area to sample")]
    DegenerateMesh,
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Updates a camera-to-world pose for a world rescaled by `s`: the rotation
/// is composed with `R_S` only, the camera center is mapped like any point.
pub fn transform_camera_pose(pose: &RigidPose, s: &Sim3) -> RigidPose {
    RigidPose::new(s.rotation() * pose.rotation, s.transform_point(&pose.translation))
}

/// Area-weighted uniform sampling of the mesh surface.
pub fn sample_mesh_points(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud, AlignError> {
    let areas: Vec<f64> = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).collect();
    let dist = WeightedIndex::new(&areas).map_err(|_| AlignError::DegenerateMesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let [a, b, c] = mesh.triangle(dist.sample(&mut rng));
            let r1: f64 = rng.random::<f64>().sqrt();
            let r2: f64 = rng.random();
            a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
        })
        .collect();
    Ok(PointCloud { points, label: format!("{}:surface", mesh.label) })
}
