//! RRT-Connect in joint space with certified continuous edge checks,
//! random shortcutting and uniform resampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chain::KinematicChain;
use super::collision::{clearance, ObstacleSet};
use super::KinError;

pub const DEFAULT_DT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub dt: f64,
    pub waypoints: Vec<Vec<f64>>,
}

impl JointTrajectory {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    pub fn from_json(text: &str) -> Result<JointTrajectory, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Largest L∞ joint step between consecutive waypoints.
    pub fn max_step(&self) -> f64 {
        self.waypoints.windows(2).map(|w| linf(&w[0], &w[1])).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    /// L∞ extension step in radians; also the output waypoint spacing.
    pub step_size: f64,
    pub goal_bias: f64,
    pub max_samples: usize,
    pub seed: u64,
    pub shortcut_attempts: usize,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams { step_size: 0.1, goal_bias: 0.1, max_samples: 20_000, seed: 0, shortcut_attempts: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("start configuration is in collision")]
    StartInCollision,
    #[error("goal configuration is in collision")]
    GoalInCollision,
    #[error("{0} configuration violates joint limits")]
    OutOfLimits(&'static str),
    #[error("no path found within {samples} samples")]
    NoPath { samples: usize },
    #[error("invalid planner parameters: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Kinematics(#[from] KinError),
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + (y - x) * t).collect()
}

/// Collision queries shared by the planner and post-hoc validation.
pub struct EdgeValidator<'a> {
    chain: &'a KinematicChain,
    obstacles: &'a ObstacleSet,
    resolution: f64,
}

impl<'a> EdgeValidator<'a> {
    pub fn new(chain: &'a KinematicChain, obstacles: &'a ObstacleSet, resolution: f64) -> Self {
        EdgeValidator { chain, obstacles, resolution }
    }

    pub fn margin(&self, q: &[f64]) -> Result<f64, KinError> {
        let c = clearance(self.chain, q, self.obstacles)?;
        Ok(if c.in_collision() { 0.0 } else { c.margin() })
    }

    pub fn config_free(&self, q: &[f64]) -> Result<bool, KinError> {
        Ok(!clearance(self.chain, q, self.obstacles)?.in_collision())
    }

    /// Upper bound on how far any collision sphere center moves along the
    /// straight joint-space segment `a → b`.
    fn sweep_bound(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(self.chain.reach()).map(|((x, y), r)| (x - y).abs() * r).sum()
    }

    /// Discrete checks at `resolution`, then a clearance-bound certificate
    /// that the whole segment is free. Endpoints must already be free.
    pub fn edge_free(&self, a: &[f64], b: &[f64]) -> Result<bool, KinError> {
        let n = (linf(a, b) / self.resolution).ceil().max(1.0) as usize;
        for k in 1..n {
            if !self.config_free(&lerp(a, b, k as f64 / n as f64))? {
                return Ok(false);
            }
        }
        let ma = self.margin(a)?;
        let mb = self.margin(b)?;
        self.certify(a, b, ma, mb, 0)
    }

    fn certify(&self, a: &[f64], b: &[f64], ma: f64, mb: f64, depth: u32) -> Result<bool, KinError> {
        if ma <= 0.0 || mb <= 0.0 {
            return Ok(false);
        }
        if ma + mb > self.sweep_bound(a, b) {
            return Ok(true);
        }
        if depth >= 40 {
            // cannot certify: treat as blocked rather than guess
            return Ok(false);
        }
        let mid = lerp(a, b, 0.5);
        let mm = self.margin(&mid)?;
        Ok(self.certify(a, &mid, ma, mm, depth + 1)? && self.certify(&mid, b, mm, mb, depth + 1)?)
    }
}

struct Tree {
    nodes: Vec<Vec<f64>>,
    parent: Vec<usize>,
}

impl Tree {
    fn new(root: Vec<f64>) -> Tree {
        Tree { nodes: vec![root], parent: vec![usize::MAX] }
    }

    fn nearest(&self, q: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = dist_sq(n, q);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    fn add(&mut self, q: Vec<f64>, parent: usize) -> usize {
        self.nodes.push(q);
        self.parent.push(parent);
        self.nodes.len() - 1
    }

    /// Root-to-node path.
    fn path_to(&self, mut i: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        while i != usize::MAX {
            out.push(self.nodes[i].clone());
            i = self.parent[i];
        }
        out.reverse();
        out
    }
}

enum Extend {
    Reached(usize),
    Advanced(usize),
    Trapped,
}

fn extend(tree: &mut Tree, target: &[f64], step: f64, v: &EdgeValidator) -> Result<Extend, KinError> {
    let near = tree.nearest(target);
    let from = tree.nodes[near].clone();
    let d = linf(&from, target);
    let (q_new, reached) = if d <= step { (target.to_vec(), true) } else { (lerp(&from, target, step / d), false) };
    if !v.config_free(&q_new)? || !v.edge_free(&from, &q_new)? {
        return Ok(Extend::Trapped);
    }
    let id = tree.add(q_new, near);
    Ok(if reached { Extend::Reached(id) } else { Extend::Advanced(id) })
}

fn connect(tree: &mut Tree, target: &[f64], step: f64, v: &EdgeValidator) -> Result<Option<usize>, KinError> {
    loop {
        match extend(tree, target, step, v)? {
            Extend::Reached(id) => return Ok(Some(id)),
            Extend::Advanced(_) => {}
            Extend::Trapped => return Ok(None),
        }
    }
}

/// Plans a collision-free joint trajectory from `start` to `goal`. The
/// returned waypoints start and end exactly at the inputs and are spaced
/// at most `step_size` apart (L∞).
pub fn plan_rrt(
    chain: &KinematicChain,
    start: &[f64],
    goal: &[f64],
    obstacles: &ObstacleSet,
    params: &PlanParams,
) -> Result<JointTrajectory, PlanError> {
    if !(params.step_size > 0.0) || !(0.0..=1.0).contains(&params.goal_bias) {
        return Err(PlanError::InvalidParams("step_size must be positive and goal_bias in [0, 1]"));
    }
    chain.check_dof(start)?;
    chain.check_dof(goal)?;
    if !chain.within_limits(start) {
        return Err(PlanError::OutOfLimits("start"));
    }
    if !chain.within_limits(goal) {
        return Err(PlanError::OutOfLimits("goal"));
    }
    let v = EdgeValidator::new(chain, obstacles, params.step_size / 4.0);
    if !v.config_free(start)? {
        return Err(PlanError::StartInCollision);
    }
    if !v.config_free(goal)? {
        return Err(PlanError::GoalInCollision);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let path = if v.edge_free(start, goal)? {
        vec![start.to_vec(), goal.to_vec()]
    } else {
        let mut path = grow(chain, start, goal, &v, params, &mut rng)?;
        shortcut(&mut path, &v, params.shortcut_attempts, &mut rng)?;
        path
    };
    Ok(JointTrajectory { dt: DEFAULT_DT, waypoints: resample(&path, params.step_size) })
}

fn grow(
    chain: &KinematicChain,
    start: &[f64],
    goal: &[f64],
    v: &EdgeValidator,
    params: &PlanParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>, PlanError> {
    let mut a = Tree::new(start.to_vec());
    let mut b = Tree::new(goal.to_vec());
    // `a` always holds the tree rooted at the start when this is false
    let mut swapped = false;
    for _ in 0..params.max_samples {
        let sample: Vec<f64> = if rng.random::<f64>() < params.goal_bias {
            b.nodes[0].clone()
        } else {
            chain.joints.iter().map(|j| rng.random_range(j.lower..=j.upper)).collect()
        };
        let new_a = match extend(&mut a, &sample, params.step_size, v)? {
            Extend::Trapped => None,
            Extend::Reached(id) | Extend::Advanced(id) => Some(id),
        };
        if let Some(ia) = new_a {
            let q = a.nodes[ia].clone();
            if let Some(ib) = connect(&mut b, &q, params.step_size, v)? {
                let mut pa = a.path_to(ia);
                let mut pb = b.path_to(ib);
                pb.pop();
                pb.reverse();
                pa.extend(pb);
                if swapped {
                    pa.reverse();
                }
                return Ok(pa);
            }
        }
        std::mem::swap(&mut a, &mut b);
        swapped = !swapped;
    }
    Err(PlanError::NoPath { samples: params.max_samples })
}

fn shortcut(
    path: &mut Vec<Vec<f64>>,
    v: &EdgeValidator,
    attempts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(), KinError> {
    for _ in 0..attempts {
        if path.len() < 3 {
            break;
        }
        let i = rng.random_range(0..path.len() - 2);
        let j = rng.random_range(i + 2..path.len());
        if v.edge_free(&path[i], &path[j])? {
            path.drain(i + 1..j);
        }
    }
    Ok(())
}

fn resample(path: &[Vec<f64>], step: f64) -> Vec<Vec<f64>> {
    let mut out = vec![path[0].clone()];
    for w in path.windows(2) {
        let n = (linf(&w[0], &w[1]) / step).ceil().max(1.0) as usize;
        for k in 1..n {
            out.push(lerp(&w[0], &w[1], k as f64 / n as f64));
        }
        out.push(w[1].clone());
    }
    out
}

/// Re-checks every waypoint and `factor` evenly spaced sub-steps per
/// segment; returns the number of colliding configurations.
pub fn count_violations(
    chain: &KinematicChain,
    traj: &JointTrajectory,
    obstacles: &ObstacleSet,
    factor: usize,
) -> Result<usize, KinError> {
    let v = EdgeValidator::new(chain, obstacles, 1.0);
    let mut bad = 0;
    for (i, q) in traj.waypoints.iter().enumerate() {
        if !v.config_free(q)? {
            bad += 1;
        }
        if let Some(next) = traj.waypoints.get(i + 1) {
            for k in 1..factor {
                if !v.config_free(&lerp(q, next, k as f64 / factor as f64))? {
                    bad += 1;
                }
            }
        }
    }
    Ok(bad)
}
