//! Episode generation: jitter, IK keyposes, planning, kinematic playback
//! and hybrid rendering of each waypoint.

use std::collections::BTreeMap;

use hybridsim_core::kinematics::{
    check_collision, forward_kinematics, ik_solve_with_restarts, plan_rrt, IkParams, KinematicChain, ObstacleSet,
    PlanParams, DEFAULT_DT,
};
use hybridsim_core::render::{composite, rasterize_meshes, render_splats, Image, MeshInstance, PinholeCamera};
use hybridsim_core::{RigidPose, Sim3, SplatSet, TriMesh, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::task::{Jitter, TaskKind, TaskSpec};
use crate::world::Assets;
use crate::PipelineError;

const IK_RESTARTS: usize = 20;
const ROBOT_GRAY: [f64; 3] = [0.7, 0.7, 0.72];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub q: Vec<f64>,
    pub gripper_closed: bool,
}

/// A contiguous, inclusive range of frames sharing one motion phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub start: usize,
    pub end: usize,
    /// Collision checks skip the target object (contact phases).
    pub ignore_target: bool,
    /// The target object follows the end effector.
    pub attached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub seed: u64,
    pub task: TaskSpec,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    /// Jittered placements used for this episode.
    pub placements: BTreeMap<String, Sim3>,
    pub camera: String,
    pub camera_poses: Vec<RigidPose>,
    pub segments: Vec<Segment>,
    pub dt: f64,
    /// Predicate distance in meters (see [`TaskKind::tolerance`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub frames: Vec<Image>,
    pub actions: Vec<Action>,
    pub meta: EpisodeMeta,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

fn sub_seed(seed: u64, k: u64) -> u64 {
    seed ^ (k + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Per-link visual meshes in link frames.
pub fn robot_meshes(chain: &KinematicChain) -> Vec<Vec<(TriMesh, [f64; 3])>> {
    chain
        .visuals
        .iter()
        .enumerate()
        .map(|(i, vis)| vis.iter().map(|v| (v.to_mesh(&chain.link_names[i]), v.color.unwrap_or(ROBOT_GRAY))).collect())
        .collect()
}

fn robot_layer(
    chain: &KinematicChain,
    meshes: &[Vec<(TriMesh, [f64; 3])>],
    q: &[f64],
    cam: &PinholeCamera,
) -> Result<(Image, hybridsim_core::render::Mask), PipelineError> {
    let fk = forward_kinematics(chain, q)?;
    let instances: Vec<MeshInstance> = fk
        .links
        .iter()
        .zip(meshes)
        .flat_map(|(pose, ms)| ms.iter().map(|(mesh, color)| MeshInstance { mesh, pose: *pose, color: *color }))
        .collect();
    let (img, mask, _) = rasterize_meshes(&instances, cam);
    Ok((img, mask))
}

/// Hybrid frame: the robot at `q` rasterized over the splat background.
pub fn render_frame(
    chain: &KinematicChain,
    splats: &SplatSet,
    q: &[f64],
    cam: &PinholeCamera,
) -> Result<Image, PipelineError> {
    let (bg, _) = render_splats(splats, cam);
    let (robot, mask) = robot_layer(chain, &robot_meshes(chain), q, cam)?;
    Ok(composite(&robot, &mask, &bg)?)
}

struct Failure {
    stage: &'static str,
    reason: String,
}

struct Keyposes {
    contact: RigidPose,
    pre: Vec<f64>,
    contact_q: Vec<f64>,
    goal_q: Option<Vec<f64>>,
    retreat_q: Vec<f64>,
}

fn solve_ik(
    chain: &KinematicChain,
    target: &RigidPose,
    init: &[f64],
    obstacles: &ObstacleSet,
    seed: u64,
    what: &str,
) -> Result<Result<Vec<f64>, Failure>, PipelineError> {
    let sol = ik_solve_with_restarts(chain, target, init, &IkParams::default(), IK_RESTARTS, seed)?;
    if !sol.converged {
        return Ok(Err(Failure {
            stage: "ik",
            reason: format!(
                "{what} unreachable: position error {:.4} m, rotation error {:.4} rad",
                sol.pos_error, sol.rot_error
            ),
        }));
    }
    if check_collision(chain, &sol.q, obstacles)? {
        return Ok(Err(Failure { stage: "ik", reason: format!("{what} solution is in collision") }));
    }
    Ok(Ok(sol.q))
}

fn keyposes(
    assets: &Assets,
    task: &TaskSpec,
    placement: &Sim3,
    full: &ObstacleSet,
    free: &ObstacleSet,
    seed: u64,
) -> Result<Result<Keyposes, Failure>, PipelineError> {
    let chain = &assets.chain;
    let contact = task.target_pose(placement);
    let pre_pose = task.pregrasp_pose(&contact);
    macro_rules! ik {
        ($pose:expr, $init:expr, $obs:expr, $k:expr, $what:expr) => {
            match solve_ik(chain, $pose, $init, $obs, sub_seed(seed, $k), $what)? {
                Ok(q) => q,
                Err(f) => return Ok(Err(f)),
            }
        };
    }
    let pre = ik!(&pre_pose, &assets.home, full, 100, "pre-contact pose");
    let contact_q = ik!(&contact, &pre, free, 101, "contact pose");
    let (goal_q, retreat_q) = match task.kind {
        TaskKind::Grasp | TaskKind::Press => (None, pre.clone()),
        TaskKind::PushPull => {
            let g = task.goal_displacement.unwrap_or_default();
            let goal = RigidPose::new(contact.rotation, contact.translation + g);
            let goal_q = ik!(&goal, &contact_q, free, 102, "push goal pose");
            let retreat = ik!(&task.pregrasp_pose(&goal), &goal_q, free, 103, "retreat pose");
            (Some(goal_q), retreat)
        }
    };
    Ok(Ok(Keyposes { contact, pre, contact_q, goal_q, retreat_q }))
}

/// Object placement for every frame: fixed, or rigidly following the end
/// effector from the first frame of an attached segment onward.
fn object_track(
    chain: &KinematicChain,
    actions: &[Action],
    segments: &[Segment],
    placement: &Sim3,
) -> Result<Vec<Sim3>, PipelineError> {
    let mut out = Vec::with_capacity(actions.len());
    let mut current = *placement;
    let mut grip: Option<(RigidPose, Sim3)> = None;
    for (i, a) in actions.iter().enumerate() {
        let attached = segments.iter().any(|s| s.attached && s.start <= i && i <= s.end);
        match (attached, grip) {
            (true, None) => {
                let ee = forward_kinematics(chain, &a.q)?.ee;
                grip = Some((ee, current));
            }
            (true, Some((ee0, p0))) => {
                let ee = forward_kinematics(chain, &a.q)?.ee;
                let delta = ee.compose(&ee0.inverse());
                current = Sim3::from_rigid(&delta).compose(&p0);
            }
            (false, _) => grip = None,
        }
        out.push(current);
    }
    Ok(out)
}

/// Jittered placements, keyposes and joint-space actions of one episode,
/// before rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedEpisode {
    pub actions: Vec<Action>,
    pub meta: EpisodeMeta,
    /// Placement of every object, in asset order.
    pub placements: Vec<Sim3>,
    pub target: usize,
}

/// Plans one episode: jitter, IK keyposes and collision-free legs. IK or
/// planning failures produce a failed plan with a stage tag and no
/// actions; only malformed inputs are errors.
pub fn plan_episode(assets: &Assets, task: &TaskSpec, seed: u64) -> Result<PlannedEpisode, PipelineError> {
    task.validate()?;
    let target = assets
        .object_index(&task.target_object)
        .ok_or_else(|| PipelineError::Task(format!("unknown target object {:?}", task.target_object)))?;
    let chain = &assets.chain;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placements = assets.placements();
    for (name, j) in &task.randomization {
        let i = assets
            .object_index(name)
            .ok_or_else(|| PipelineError::Task(format!("randomization names unknown object {name:?}")))?;
        let (d, yaw) = j.sample(&mut rng);
        placements[i] = Jitter::apply(&placements[i], d, yaw);
    }

    let mut meta = EpisodeMeta {
        seed,
        task: task.clone(),
        success: false,
        failure_stage: None,
        failure_reason: None,
        placements: assets.objects.iter().zip(&placements).map(|(o, p)| (o.name.clone(), *p)).collect(),
        camera: String::new(),
        camera_poses: Vec::new(),
        segments: Vec::new(),
        dt: DEFAULT_DT,
        task_error: None,
    };
    let fail = |meta: EpisodeMeta, f: Failure, placements: Vec<Sim3>| PlannedEpisode {
        actions: Vec::new(),
        meta: EpisodeMeta {
            success: false,
            failure_stage: Some(f.stage.to_string()),
            failure_reason: Some(f.reason),
            ..meta
        },
        placements,
        target,
    };

    let full = assets.compose_obstacles(&placements);
    let free = full.without(&[task.target_object.as_str()]);
    let keys = match keyposes(assets, task, &placements[target], &full, &free, seed)? {
        Ok(k) => k,
        Err(f) => return Ok(fail(meta, f, placements)),
    };

    // (name, from, to, ignore target, attached, gripper closed)
    let mut legs: Vec<(&str, &[f64], &[f64], bool, bool, bool)> = vec![
        ("approach", &assets.home, &keys.pre, false, false, false),
        ("descend", &keys.pre, &keys.contact_q, true, false, false),
    ];
    match task.kind {
        TaskKind::Grasp => legs.push(("lift", &keys.contact_q, &keys.retreat_q, true, true, true)),
        TaskKind::Press => legs.push(("retract", &keys.contact_q, &keys.retreat_q, true, false, false)),
        TaskKind::PushPull => {
            let goal = keys.goal_q.as_deref().expect("push goal solved");
            legs.push(("push", &keys.contact_q, goal, true, true, false));
            legs.push(("retract", goal, &keys.retreat_q, true, false, false));
        }
    }

    let mut actions: Vec<Action> = Vec::new();
    for (k, (name, from, to, ignore, attached, closed)) in legs.into_iter().enumerate() {
        let obstacles = if ignore { &free } else { &full };
        let params = PlanParams { seed: sub_seed(seed, k as u64), ..PlanParams::default() };
        let traj = match plan_rrt(chain, from, to, obstacles, &params) {
            Ok(t) => t,
            Err(e) => {
                let f = Failure { stage: "plan", reason: format!("{name}: {e}") };
                return Ok(fail(meta, f, placements));
            }
        };
        let skip = usize::from(!actions.is_empty());
        let start = actions.len() - skip;
        actions.extend(traj.waypoints.into_iter().skip(skip).map(|q| Action { q, gripper_closed: closed }));
        meta.segments.push(Segment {
            name: name.to_string(),
            start,
            end: actions.len() - 1,
            ignore_target: ignore,
            attached,
        });
    }
    if task.kind == TaskKind::Grasp {
        // the gripper closes on arrival at the contact pose
        let contact = meta.segments[1].end;
        actions[contact].gripper_closed = true;
    }

    let err = task_error(chain, task, &keys.contact, &actions, &meta.segments)?;
    meta.task_error = Some(err);
    meta.success = err <= task.kind.tolerance();
    Ok(PlannedEpisode { actions, meta, placements, target })
}

/// Renders one hybrid frame per action from `camera`.
pub fn render_episode(assets: &Assets, plan: PlannedEpisode, camera: &str) -> Result<Episode, PipelineError> {
    let cam = *assets.camera(camera).ok_or_else(|| PipelineError::Task(format!("unknown camera {camera:?}")))?;
    let PlannedEpisode { actions, mut meta, placements, target } = plan;
    let chain = &assets.chain;
    meta.camera = camera.to_string();
    meta.camera_poses = vec![cam.pose; actions.len()];

    let track = object_track(chain, &actions, &meta.segments, &placements[target])?;
    let meshes = robot_meshes(chain);
    let mut frames = Vec::with_capacity(actions.len());
    let mut cached: Option<(Sim3, Image)> = None;
    for (a, p) in actions.iter().zip(&track) {
        let bg = match &cached {
            Some((cp, img)) if cp == p => img.clone(),
            _ => {
                let mut current = placements.clone();
                current[target] = *p;
                let (splats, _) = assets.compose_splats(&current);
                let (img, _) = render_splats(&splats, &cam);
                cached = Some((*p, img.clone()));
                img
            }
        };
        let (robot, mask) = robot_layer(chain, &meshes, &a.q, &cam)?;
        frames.push(composite(&robot, &mask, &bg)?);
    }
    Ok(Episode { frames, actions, meta })
}

/// Plans and renders one episode. Deterministic in `seed`.
pub fn generate_episode(assets: &Assets, task: &TaskSpec, camera: &str, seed: u64) -> Result<Episode, PipelineError> {
    if assets.camera(camera).is_none() {
        return Err(PipelineError::Task(format!("unknown camera {camera:?}")));
    }
    render_episode(assets, plan_episode(assets, task, seed)?, camera)
}

/// Distance the executed actions miss the task predicate by, evaluated
/// from forward kinematics alone.
fn task_error(
    chain: &KinematicChain,
    task: &TaskSpec,
    contact: &RigidPose,
    actions: &[Action],
    segments: &[Segment],
) -> Result<f64, PipelineError> {
    let seg = |name: &str| {
        segments
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| PipelineError::Dataset(format!("episode has no {name} segment")))
    };
    let ee_at = |i: usize| -> Result<Vec3, PipelineError> {
        let a = actions.get(i).ok_or_else(|| PipelineError::Dataset("segment index out of range".into()))?;
        Ok(forward_kinematics(chain, &a.q)?.ee.translation)
    };
    Ok(match task.kind {
        TaskKind::Grasp => {
            let closed = actions
                .iter()
                .position(|a| a.gripper_closed)
                .ok_or_else(|| PipelineError::Dataset("gripper never closes".into()))?;
            (ee_at(closed)? - contact.translation).norm()
        }
        TaskKind::Press => (ee_at(seg("descend")?.end)? - contact.translation).norm(),
        TaskKind::PushPull => {
            let push = seg("push")?;
            let moved = ee_at(push.end)? - ee_at(push.start)?;
            (moved - task.goal_displacement.unwrap_or_default()).norm()
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    /// Predicate distance recomputed from the actions.
    pub task_error: f64,
    pub predicate_holds: bool,
    /// Frames whose configuration collides with the recomposed world.
    pub colliding_frames: usize,
}

/// Re-derives the task outcome from the recorded actions and metadata
/// only: placements are recomposed, the contact pose recomputed and every
/// configuration re-checked for collisions.
pub fn replay_check(assets: &Assets, ep: &Episode) -> Result<ReplayReport, PipelineError> {
    let task = &ep.meta.task;
    let mut placements = assets.placements();
    for (i, o) in assets.objects.iter().enumerate() {
        if let Some(p) = ep.meta.placements.get(&o.name) {
            placements[i] = *p;
        }
    }
    let target = assets
        .object_index(&task.target_object)
        .ok_or_else(|| PipelineError::Task(format!("unknown target object {:?}", task.target_object)))?;
    let contact = task.target_pose(&placements[target]);
    let err = task_error(&assets.chain, task, &contact, &ep.actions, &ep.meta.segments)?;
    let full = assets.compose_obstacles(&placements);
    let free = full.without(&[task.target_object.as_str()]);
    let mut colliding = 0;
    for (i, a) in ep.actions.iter().enumerate() {
        let ignore = ep.meta.segments.iter().any(|s| s.ignore_target && s.start <= i && i <= s.end);
        if check_collision(&assets.chain, &a.q, if ignore { &free } else { &full })? {
            colliding += 1;
        }
    }
    Ok(ReplayReport { task_error: err, predicate_holds: err <= task.kind.tolerance(), colliding_frames: colliding })
}
