use anyhow::{bail, ensure};
use hybridsim_core::kinematics::{
    check_collision, forward_kinematics, ik_solve, ik_solve_with_restarts, parse_chain, plan_rrt, IkParams,
    KinematicChain, ObstacleSet, PlanError, PlanParams,
};
use hybridsim_core::{RigidPose, TriMesh, Vec3};
use hybridsim_pipeline::fixture;
use rand::Rng;
use std::f64::consts::{PI, TAU};

use crate::gen::*;
use crate::{oracle, Outcome};

/// Two unit links turning about z, tool at the tip.
const TWO_LINK: &str = r#"<robot name="planar">
  <link name="base"/><link name="upper"/><link name="lower"/><link name="tip"/>
  <joint name="j1" type="revolute"><parent link="base"/><child link="upper"/>
    <axis xyz="0 0 1"/><limit lower="-3.1" upper="3.1" effort="1" velocity="1"/></joint>
  <joint name="j2" type="revolute"><origin xyz="1 0 0"/><parent link="upper"/><child link="lower"/>
    <axis xyz="0 0 1"/><limit lower="-3.1" upper="3.1" effort="1" velocity="1"/></joint>
  <joint name="tool" type="fixed"><origin xyz="1 0 0"/><parent link="lower"/><child link="tip"/></joint>
</robot>"#;

const TWO_LINK_SPHERES: &str = r#"{
  "upper": [{"center": [0.25, 0, 0], "radius": 0.05}, {"center": [0.5, 0, 0], "radius": 0.05},
            {"center": [0.75, 0, 0], "radius": 0.05}],
  "lower": [{"center": [0.25, 0, 0], "radius": 0.05}, {"center": [0.5, 0, 0], "radius": 0.05},
            {"center": [0.75, 0, 0], "radius": 0.05}, {"center": [1.0, 0, 0], "radius": 0.05}]
}"#;

fn planar() -> KinematicChain {
    parse_chain(TWO_LINK, Some(TWO_LINK_SPHERES)).unwrap()
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}

pub fn kinematics() -> Outcome {
    let c = planar();
    let mut r = rng(0xe5);
    let mut fk = 0.0f64;
    for _ in 0..2000 {
        let (a, b) = (r.random_range(-3.1..3.1), r.random_range(-3.1..3.1));
        let p = forward_kinematics(&c, &[a, b])?.ee.translation;
        let expected = Vec3::new(a.cos() + (a + b).cos(), a.sin() + (a + b).sin(), 0.0);
        fk = fk.max((p - expected).amax());
    }
    ensure!(fk <= 1e-12, "planar FK off by {fk:.3e}");

    let mut ik = 0.0f64;
    for case in 0..200 {
        let (rad, phi) = (r.random_range(0.3..1.8), r.random_range(-PI..PI));
        let (x, y) = (rad * phi.cos(), rad * phi.sin());
        let branch = case % 2;
        let init = if branch == 0 { [0.0, 1.0] } else { [0.0, -1.0] };
        let target = RigidPose::from_translation(Vec3::new(x, y, 0.0));
        let sol = ik_solve_with_restarts(&c, &target, &init, &IkParams::position_only(), 10, case as u64)?;
        ensure!(sol.converged, "two-link case {case} did not converge: {:?}", sol.q);
        let p = forward_kinematics(&c, &sol.q)?.ee.translation;
        ik = ik.max((p - Vec3::new(x, y, 0.0)).norm());
        let near = oracle::two_link_ik(x, y)
            .iter()
            .any(|(t1, t2)| wrap(sol.q[0] - t1).abs() < 1e-3 && wrap(sol.q[1] - t2).abs() < 1e-3);
        ensure!(near, "case {case}: {:?} is neither analytic elbow solution", sol.q);
    }
    ensure!(ik <= 1e-4, "two-link IK misses by {ik:.3e} m");

    let arm = fixture::demo_chain();
    let home = fixture::HOME.to_vec();
    let mut worst = (0.0f64, 0.0f64);
    for k in 0..500 {
        let q: Vec<f64> = arm.joints.iter().map(|j| r.random_range(j.lower..j.upper)).collect();
        let target = forward_kinematics(&arm, &q)?.ee;
        let sol = ik_solve_with_restarts(&arm, &target, &home, &IkParams::default(), 30, k)?;
        let ee = forward_kinematics(&arm, &sol.q)?.ee;
        let (dp, dr) = ((ee.translation - target.translation).norm(), ee.rotation.angle_to(&target.rotation));
        ensure!(sol.converged && dp <= 1e-4 && dr <= 1e-3, "target {k}: {dp:.2e} m, {dr:.2e} rad");
        ensure!(arm.within_limits(&sol.q), "target {k}: solution outside joint limits");
        worst = (worst.0.max(dp), worst.1.max(dr));
    }

    for k in 0..50 {
        let phi = r.random_range(-PI..PI);
        let rad = r.random_range(2.1..3.0);
        let target = RigidPose::from_translation(Vec3::new(rad * phi.cos(), rad * phi.sin(), 0.0));
        let sol = ik_solve(&c, &target, &[0.1, 0.2], &IkParams::position_only())?;
        ensure!(!sol.converged, "unreachable target {k} reported as solved");
        ensure!(sol.pos_error >= rad - 2.0 - 1e-6, "unreachable target {k}: error {} understated", sol.pos_error);
    }
    Ok(format!(
        "FK {fk:.1e}; two-link IK {ik:.1e} m; 500 round-trips worst {:.1e} m / {:.1e} rad; 50 unreachable reported",
        worst.0, worst.1
    ))
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Collision-checks every segment at a quarter of the planner's check
/// spacing.
fn violations(c: &KinematicChain, waypoints: &[Vec<f64>], obs: &ObstacleSet, spacing: f64) -> anyhow::Result<usize> {
    let mut bad = 0;
    for w in waypoints.windows(2) {
        let span = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let n = (span / spacing).ceil().max(1.0) as usize;
        for k in 0..=n {
            bad += usize::from(check_collision(c, &lerp(&w[0], &w[1], k as f64 / n as f64), obs)?);
        }
    }
    Ok(bad)
}

pub fn planning() -> Outcome {
    let c = planar();
    let mut post = ObstacleSet::new();
    post.push(
        "post",
        TriMesh::cuboid(Vec3::new(0.2, 0.2, 0.4), "post"),
        RigidPose::from_translation(Vec3::new(1.5, 0.0, 0.0)),
    );
    let params = |seed| PlanParams { seed, ..PlanParams::default() };
    let spacing = params(0).step_size / 4.0 / 4.0;

    let mut r = rng(0xf6);
    let mut checked = 0;
    for seed in 0..100 {
        let start = vec![r.random_range(-1.2..-0.6), r.random_range(-0.5..0.5)];
        let goal = vec![r.random_range(0.6..1.2), r.random_range(-0.5..0.5)];
        ensure!(violations(&c, &[start.clone(), goal.clone()], &post, spacing)? > 0, "problem {seed} is not blocked");
        let traj = plan_rrt(&c, &start, &goal, &post, &params(seed))?;
        ensure!(
            traj.waypoints.first() == Some(&start) && traj.waypoints.last() == Some(&goal),
            "problem {seed}: endpoints moved"
        );
        let bad = violations(&c, &traj.waypoints, &post, spacing)?;
        ensure!(bad == 0, "problem {seed}: {bad} colliding configurations");
        checked += traj.waypoints.len();
        if seed % 10 == 0 {
            ensure!(plan_rrt(&c, &start, &goal, &post, &params(seed))? == traj, "problem {seed} is not deterministic");
        }
    }

    let mut walls = ObstacleSet::new();
    for x in [1.7, -1.7] {
        walls.push(
            "wall",
            TriMesh::cuboid(Vec3::new(2.8, 0.1, 1.0), "wall"),
            RigidPose::from_translation(Vec3::new(x, 0.0, 0.0)),
        );
    }
    let p = PlanParams { max_samples: 2000, ..params(3) };
    match plan_rrt(&c, &[1.5, 0.0], &[-1.5, 0.0], &walls, &p) {
        Err(PlanError::NoPath { .. }) => {}
        other => bail!("separated problem returned {other:?}"),
    }
    let mut plate = ObstacleSet::new();
    plate.push(
        "plate",
        TriMesh::cuboid(Vec3::new(0.02, 0.4, 0.4), "plate"),
        RigidPose::from_translation(Vec3::new(1.5, 0.0, 0.0)),
    );
    ensure!(
        plan_rrt(&c, &[-0.9, 0.0], &[0.0, 0.0], &plate, &params(1)) == Err(PlanError::GoalInCollision),
        "goal in collision accepted"
    );
    Ok(format!("100 blocked problems, {checked} waypoints, 0 violations at 4x; deterministic; infeasible rejected"))
}
