use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{ensure, Context};
use hybridsim_core::align::sample_mesh_points;
use hybridsim_core::kinematics::{forward_kinematics, parse_chain, serialize_chain, JointTrajectory};
use hybridsim_core::splat::{parse_splat_ply, write_splat_ply};
use hybridsim_core::{Sim3, TriMesh, Vec3};
use hybridsim_pipeline::world::COINCIDENCE_SAMPLES;
use hybridsim_pipeline::{
    compose_world, fixture, generate_dataset, generate_episode, load_dataset, load_manifest, replay_check,
    save_manifest, write_dataset, Assets, SceneManifest, TaskKind,
};
use nalgebra::UnitQuaternion;
use rand::Rng;

use crate::gen::*;
use crate::{oracle, within, Outcome};

fn demo() -> anyhow::Result<(tempfile::TempDir, PathBuf, SceneManifest)> {
    let dir = tempfile::tempdir()?;
    let path = fixture::write_demo_scene(dir.path())?;
    let m = load_manifest(&path)?;
    Ok((dir, path, m))
}

/// Chamfer between the placed splat means and placed mesh samples, with
/// both placements applied by hand to the stored assets.
fn placed_chamfer(m: &SceneManifest, object: usize, placement: &Sim3) -> anyhow::Result<f64> {
    let entry = &m.objects[object];
    let raw = parse_splat_ply(&std::fs::read(m.resolve(&entry.splats))?)?;
    let means: Vec<Vec3> =
        raw.splats.iter().map(|g| oracle::apply(placement, &oracle::apply(&entry.object_align, &g.mean))).collect();
    let mesh = TriMesh::load(&m.resolve(&entry.mesh))?;
    let placed = TriMesh::new(
        mesh.vertices.iter().map(|v| oracle::apply(placement, v)).collect(),
        mesh.triangles.clone(),
        "placed",
    )?;
    let samples = sample_mesh_points(&placed, COINCIDENCE_SAMPLES, 0x5eed)?;
    Ok(oracle::chamfer(&means, &samples.points))
}

pub fn coincidence() -> Outcome {
    let (_dir, _, m) = demo()?;
    let (assets, world) = compose_world(&m)?;
    let mut worst_ratio = 0.0f64;
    let mut check = |i: usize, placement: &Sim3, lib: f64| -> anyhow::Result<()> {
        let own = placed_chamfer(&m, i, placement)?;
        ensure!((own - lib).abs() <= 1e-9, "object {i}: library {lib} vs oracle {own}");
        let ratio = own / assets.objects[i].align_residual;
        ensure!(ratio < 2.0, "object {i}: Chamfer {own:.4e} is {ratio:.2}x the stored residual");
        worst_ratio = worst_ratio.max(ratio);
        Ok(())
    };
    for i in 0..assets.objects.len() {
        check(i, &world.placements[i], world.coincidence(&assets, i)?)?;
    }
    let mut r = rng(0x17);
    for _ in 0..50 {
        let placements: Vec<Sim3> = assets
            .objects
            .iter()
            .map(|_| {
                let yaw = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), r.random_range(-3.1..3.1));
                let tilt = UnitQuaternion::from_scaled_axis(vec3(&mut r, 0.5));
                let t = Vec3::new(r.random_range(0.2..0.8), r.random_range(-0.4..0.4), r.random_range(0.0..0.3));
                Sim3::new(r.random_range(0.7..1.4), yaw * tilt, t).unwrap()
            })
            .collect();
        let edited = assets.compose(&placements);
        for (i, p) in placements.iter().enumerate() {
            check(i, p, edited.coincidence(&assets, i)?)?;
        }
    }
    Ok(format!("composition plus 50 edits, worst {worst_ratio:.2}x the stored residual"))
}

/// Every file under `dir` with its bytes, sorted by relative path.
fn tree(dir: &Path) -> anyhow::Result<Vec<(PathBuf, Vec<u8>)>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir)?.to_path_buf(), std::fs::read(&p)?));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Re-derives the grasp predicate from the recorded actions alone.
fn grasp_holds(assets: &Assets, ep: &hybridsim_pipeline::Episode) -> anyhow::Result<bool> {
    let task = &ep.meta.task;
    let closed = ep.actions.iter().position(|a| a.gripper_closed).context("gripper never closes")?;
    let contact = task.target_pose(&ep.meta.placements[&task.target_object]);
    let ee = forward_kinematics(&assets.chain, &ep.actions[closed].q)?.ee.translation;
    Ok((ee - contact.translation).norm() <= TaskKind::Grasp.tolerance())
}

pub fn end_to_end() -> Outcome {
    let (_dir, _, m) = demo()?;
    let (assets, _) = compose_world(&m)?;
    let task = fixture::grasp_task();
    let serial = tempfile::tempdir()?;
    let parallel = tempfile::tempdir()?;

    let t0 = Instant::now();
    let index = generate_dataset(&assets, &task, "head", 10, 0, 1, serial.path())?;
    let took = t0.elapsed();
    within(took, Duration::from_secs(300))?;
    ensure!(index.total == 10, "{} episodes written", index.total);

    let (_, episodes) = load_dataset(serial.path())?;
    for (e, ep) in index.episodes.iter().zip(&episodes) {
        if !ep.meta.success {
            continue;
        }
        ensure!(grasp_holds(&assets, ep)?, "episode {} fails the predicate on replay", e.id);
        let report = replay_check(&assets, ep)?;
        ensure!(report.predicate_holds && report.colliding_frames == 0, "episode {}: {report:?}", e.id);
    }
    generate_dataset(&assets, &task, "head", 10, 0, 4, parallel.path())?;
    let (a, b) = (tree(serial.path())?, tree(parallel.path())?);
    ensure!(a.len() == b.len() && a == b, "serial and 4-worker datasets differ");
    Ok(format!(
        "{}/10 grasps succeeded in {took:.1?}, all replay; {} files byte-identical across 1 and 4 workers",
        index.successes,
        a.len()
    ))
}

pub fn io() -> Outcome {
    let mut r = rng(0x10);
    let fixture_bytes = write_splat_ply(&splat_set(&mut r, 100, 3));
    ensure!(write_splat_ply(&parse_splat_ply(&fixture_bytes)?) == fixture_bytes, "100-splat file changed on rewrite");
    for degree in 0..=3u8 {
        let set = splat_set(&mut r, 1000, degree);
        let once = parse_splat_ply(&write_splat_ply(&set))?;
        ensure!(once.len() == 1000, "degree {degree}: {} splats read back", once.len());
        ensure!(parse_splat_ply(&write_splat_ply(&once))? == once, "degree {degree}: second pass changed the set");
        for (a, b) in set.splats.iter().zip(&once.splats) {
            // one pass through float32
            ensure!(
                oracle::param_gap(a, b) <= 1e-5 * (1.0 + a.mean.amax().max(a.opacity_logit.abs())),
                "degree {degree}: field drift"
            );
            ensure!(a.sh.degree() == b.sh.degree(), "degree {degree}: SH degree changed");
        }
    }

    let (dir, path, m) = demo()?;
    let copy = dir.path().join("copy.json");
    save_manifest(&m, &copy)?;
    ensure!(load_manifest(&copy)? == m, "manifest changed on save and load");
    ensure!(std::fs::read(&copy)? == std::fs::read(&path)?, "manifest bytes changed on save");

    let traj = JointTrajectory {
        dt: 0.05,
        waypoints: (0..50).map(|_| (0..6).map(|_| r.random_range(-3.0..3.0)).collect()).collect(),
    };
    ensure!(JointTrajectory::from_json(&traj.to_json())? == traj, "trajectory changed");
    let chain = fixture::demo_chain();
    let (urdf, spheres) = serialize_chain(&chain)?;
    ensure!(parse_chain(&urdf, Some(&spheres))?.approx_eq(&chain, 1e-12), "robot description changed");

    let (assets, _) = compose_world(&m)?;
    let episodes = vec![
        generate_episode(&assets, &fixture::grasp_task(), "head", 0)?,
        generate_episode(&assets, &fixture::push_task(), "side", 1)?,
    ];
    let out = tempfile::tempdir()?;
    let index = write_dataset(&episodes, out.path())?;
    let (back_index, back) = load_dataset(out.path())?;
    ensure!(back_index == index, "dataset index changed");
    for (a, b) in episodes.iter().zip(&back) {
        ensure!(a.actions == b.actions && a.meta == b.meta, "episode {} changed", a.meta.seed);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            ensure!(fa.to_png()? == fb.to_png()?, "episode {}: frame bytes changed", a.meta.seed);
        }
    }
    Ok("PLY byte-stable, manifest, trajectory, robot and dataset equal on reload".into())
}
