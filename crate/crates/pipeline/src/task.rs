//! Task descriptions driving episode generation.

use std::collections::BTreeMap;
use std::path::Path;

use hybridsim_core::{RigidPose, Sim3, Vec3};
use nalgebra::UnitQuaternion;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Grasp,
    Press,
    PushPull,
}

impl TaskKind {
    /// Success tolerance on the end-effector position, in meters.
    pub fn tolerance(self) -> f64 {
        match self {
            TaskKind::Grasp => 0.005,
            TaskKind::Press => 0.003,
            TaskKind::PushPull => 0.010,
        }
    }
}

/// Uniform placement jitter: a world-frame translation offset per axis and
/// a yaw about the world z axis through the object origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jitter {
    #[serde(default)]
    pub translation: [[f64; 2]; 3],
    #[serde(default)]
    pub yaw: [f64; 2],
}

impl Jitter {
    fn validate(&self) -> Result<(), String> {
        for [lo, hi] in self.translation.iter().copied().chain([self.yaw]) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(format!("bounds [{lo}, {hi}] must be finite and ordered"));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> (Vec3, f64) {
        let draw = |rng: &mut dyn rand::RngCore, [lo, hi]: [f64; 2]| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        };
        let d =
            Vec3::new(draw(rng, self.translation[0]), draw(rng, self.translation[1]), draw(rng, self.translation[2]));
        (d, draw(rng, self.yaw))
    }

    /// `placement` moved by translation `d` and yawed by `yaw` about its own
    /// origin.
    pub fn apply(placement: &Sim3, d: Vec3, yaw: f64) -> Sim3 {
        let rz = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw);
        Sim3::new(placement.scale(), rz * placement.rotation(), placement.translation() + d)
            .expect("jittered placement keeps a valid scale")
    }
}

fn default_pregrasp() -> f64 {
    0.08
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub target_object: String,
    /// Tool pose in the object's mesh frame at contact. Its translation is
    /// scaled with the object.
    pub approach_offset: RigidPose,
    /// World-frame displacement for push/pull tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_displacement: Option<Vec3>,
    #[serde(default)]
    pub randomization: BTreeMap<String, Jitter>,
    /// Stand-off along the tool −z axis before contact.
    #[serde(default = "default_pregrasp")]
    pub pregrasp_distance: f64,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |field: &str, msg: String| PipelineError::Task(format!("{field}: {msg}"));
        match (self.kind, &self.goal_displacement) {
            (TaskKind::PushPull, None) => return Err(bad("goal_displacement", "required for push_pull tasks".into())),
            (TaskKind::PushPull, Some(g)) if !g.iter().all(|v| v.is_finite()) => {
                return Err(bad("goal_displacement", "must be finite".into()))
            }
            (TaskKind::Grasp | TaskKind::Press, Some(_)) => {
                return Err(bad("goal_displacement", "only valid for push_pull tasks".into()))
            }
            _ => {}
        }
        if !(self.pregrasp_distance.is_finite() && self.pregrasp_distance >= 0.0) {
            return Err(bad("pregrasp_distance", "must be finite and non-negative".into()));
        }
        if !self.approach_offset.translation.iter().all(|v| v.is_finite()) {
            return Err(bad("approach_offset", "must be finite".into()));
        }
        for (name, j) in &self.randomization {
            j.validate().map_err(|m| bad(&format!("randomization.{name}"), m))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<TaskSpec, PipelineError> {
        let t: TaskSpec = serde_json::from_str(text).map_err(|e| PipelineError::Task(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<TaskSpec, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        TaskSpec::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task serializes")
    }

    /// Contact pose of the tool for an object at `placement`.
    pub fn target_pose(&self, placement: &Sim3) -> RigidPose {
        let offset =
            RigidPose::new(self.approach_offset.rotation, self.approach_offset.translation * placement.scale());
        placement.rigid_part().compose(&offset)
    }

    /// Tool pose backed off along its −z axis.
    pub fn pregrasp_pose(&self, target: &RigidPose) -> RigidPose {
        target.compose(&RigidPose::from_translation(Vec3::new(0.0, 0.0, -self.pregrasp_distance)))
    }
}
