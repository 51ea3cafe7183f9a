//! Robot model, kinematics, collision checking and joint-space planning.

mod chain;
mod collision;
mod fk;
mod ik;
mod rrt;

pub use chain::{
    parse_chain, serialize_chain, KinematicChain, RevoluteJoint, Sphere, SphereSidecar, Visual, VisualShape,
};
pub use collision::{
    check_collision, clearance, closest_point_on_triangle, link_spheres, Bvh, Clearance, Obstacle, ObstacleSet,
};
pub use fk::{forward_kinematics, jacobian, FkResult};
pub use ik::{ik_solve, ik_solve_with_restarts, pose_error, IkParams, IkSolution};
pub use rrt::{count_violations, plan_rrt, EdgeValidator, JointTrajectory, PlanError, PlanParams, DEFAULT_DT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinError {
    #[error("expected {expected} joint values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("robot description: {0}")]
    Urdf(String),
    #[error("unsupported joint type {kind} at joint {joint}")]
    UnsupportedJoint { joint: String, kind: String },
    #[error("branching chain at link {0}")]
    Branching(String),
    #[error("missing limits on joint {0}")]
    MissingLimits(String),
    #[error("collision sidecar references unknown link {0}")]
    UnknownLink(String),
    #[error("collision sidecar: {0}")]
    Sidecar(String),
    #[error("invalid chain: {0}")]
    Structure(String),
    #[error("target pose is not finite")]
    NonFiniteTarget,
}
