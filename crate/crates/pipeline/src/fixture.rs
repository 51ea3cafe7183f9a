//! A small synthetic scene used by tests, the acceptance suite and the
//! `make_demo_scene` example: a splat room, a cube and a cylinder on the
//! floor, and a six-joint arm with a two-link wrist extension.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use hybridsim_core::align::sample_mesh_points;
use hybridsim_core::kinematics::{serialize_chain, KinematicChain, RevoluteJoint, Sphere, Visual, VisualShape};
use hybridsim_core::render::sh::SH_C0;
use hybridsim_core::render::PinholeCamera;
use hybridsim_core::splat::{apply_sim3, parse_splat_ply, write_splat_ply};
use hybridsim_core::{GaussianSplat, RigidPose, ShCoefficients, Sim3, SplatSet, TriMesh, Vec3};
use nalgebra::{Unit, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::manifest::{CameraEntry, ObjectEntry, RobotEntry, SceneEntry, SceneManifest, StaticObstacle};
use crate::task::{Jitter, TaskKind, TaskSpec};
use crate::world::splat_mesh_chamfer;
use crate::PipelineError;

pub const HOME: [f64; 6] = [0.0, 0.5, 1.5, 0.0, 1.14, 0.0];
pub const CUBE_CENTER: [f64; 3] = [0.5, 0.15, 0.025];
pub const CYLINDER_CENTER: [f64; 3] = [0.5, -0.15, 0.04];

fn dc(color: [f64; 3]) -> [f64; 3] {
    color.map(|c| (c - 0.5) / SH_C0)
}

fn splat(mean: Vec3, log_scales: Vec3, q: UnitQuaternion<f64>, color: [f64; 3], degree: u8) -> GaussianSplat {
    let mut coeffs = vec![[0.0; 3]; ShCoefficients::count_for_degree(degree)];
    coeffs[0] = dc(color);
    let sh = ShCoefficients::new(degree, coeffs).expect("valid degree");
    GaussianSplat::new(mean, log_scales, [q.w, q.i, q.j, q.k], 3.0, sh).expect("finite splat")
}

/// Floor and back wall in the robot base frame.
pub fn room_splats() -> SplatSet {
    let mut out = Vec::new();
    let flat = |s: f64| Vec3::new(s.ln(), s.ln(), 0.002f64.ln());
    let (nx, ny) = (50, 40);
    for i in 0..nx {
        for j in 0..ny {
            let x = -0.4 + 1.8 * (i as f64 + 0.5) / nx as f64;
            let y = -1.0 + 2.0 * (j as f64 + 0.5) / ny as f64;
            let checker = ((i / 5 + j / 5) % 2) as f64;
            let c = 0.45 + 0.2 * checker;
            out.push(splat(Vec3::new(x, y, 0.0), flat(0.03), UnitQuaternion::identity(), [c, c * 0.9, c * 0.8], 0));
        }
    }
    // wall plane x = -0.45, normal along x
    let wall = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), PI / 2.0);
    let (nz, ny) = (25, 40);
    for k in 0..nz {
        for j in 0..ny {
            let z = 1.0 * (k as f64 + 0.5) / nz as f64;
            let y = -1.0 + 2.0 * (j as f64 + 0.5) / ny as f64;
            out.push(splat(Vec3::new(-0.45, y, z), flat(0.035), wall, [0.55, 0.65, 0.8], 0));
        }
    }
    SplatSet::new(out, "robot_base")
}

/// Splats on the mesh surface in the mesh frame.
pub fn surface_splats(mesh: &TriMesh, n: usize, color: [f64; 3], seed: u64) -> SplatSet {
    let pts = sample_mesh_points(mesh, n, seed).expect("fixture meshes have area");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xface);
    let splats = pts
        .points
        .iter()
        .map(|p| {
            let jitter =
                Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 5e-4;
            let shade = rng.random_range(0.9..1.0);
            splat(p + jitter, Vec3::repeat(0.004f64.ln()), UnitQuaternion::identity(), color.map(|c| c * shade), 1)
        })
        .collect();
    SplatSet::new(splats, mesh.label.clone())
}

pub fn demo_chain() -> KinematicChain {
    let z = |v: f64| Vec3::new(0.0, 0.0, v);
    let joint = |name: &str, dz: f64, axis: Unit<Vec3>, lim: f64| RevoluteJoint {
        name: name.into(),
        origin: RigidPose::from_translation(z(dz)),
        axis,
        lower: -lim,
        upper: lim,
    };
    let joints = vec![
        joint("shoulder_pan", 0.1, Vec3::z_axis(), 3.1),
        joint("shoulder_lift", 0.1, Vec3::y_axis(), 1.6),
        joint("elbow", 0.4, Vec3::y_axis(), 2.6),
        joint("forearm_roll", 0.35, Vec3::z_axis(), 3.1),
        joint("wrist_pitch", 0.05, Vec3::y_axis(), 2.4),
        joint("wrist_roll", 0.05, Vec3::z_axis(), 3.1),
    ];
    let names = ["base", "turret", "upper_arm", "forearm", "wrist_a", "wrist_b", "flange"];
    let s = |c: f64, r: f64| Sphere { center: z(c), radius: r };
    let spheres = vec![
        vec![s(0.1, 0.07)],
        vec![s(0.05, 0.06)],
        vec![s(0.1, 0.05), s(0.2, 0.05), s(0.3, 0.05)],
        vec![s(0.1, 0.045), s(0.2, 0.045), s(0.3, 0.045)],
        vec![s(0.02, 0.04)],
        vec![s(0.05, 0.035)],
        vec![s(0.05, 0.025), s(0.09, 0.015)],
    ];
    let cyl = |at: f64, radius: f64, length: f64, color: [f64; 3]| Visual {
        origin: RigidPose::from_translation(z(at)),
        shape: VisualShape::Cylinder { radius, length },
        color: Some(color),
    };
    let orange = [0.95, 0.55, 0.15];
    let grey = [0.35, 0.35, 0.38];
    let visuals = vec![
        vec![cyl(0.1, 0.06, 0.2, grey)],
        vec![cyl(0.05, 0.05, 0.1, grey)],
        vec![cyl(0.2, 0.04, 0.4, orange)],
        vec![cyl(0.175, 0.035, 0.35, orange)],
        vec![cyl(0.025, 0.03, 0.05, grey)],
        vec![cyl(0.025, 0.028, 0.05, grey)],
        vec![
            cyl(0.05, 0.02, 0.1, [0.2, 0.2, 0.22]),
            Visual {
                origin: RigidPose::from_translation(z(0.095)),
                shape: VisualShape::Box { size: Vec3::new(0.06, 0.012, 0.01) },
                color: Some([0.2, 0.2, 0.22]),
            },
        ],
    ];
    KinematicChain::new(
        "demo_arm",
        names.iter().map(|s| s.to_string()).collect(),
        joints,
        spheres,
        visuals,
        RigidPose::from_translation(z(0.1)),
    )
    .expect("fixture chain is valid")
}

pub fn head_camera() -> PinholeCamera {
    let pose = RigidPose::look_at(Vec3::new(1.3, 0.0, 0.8), Vec3::new(0.4, 0.0, 0.15), Vec3::z());
    PinholeCamera::new(110.0, 110.0, 64.0, 48.0, 128, 96, pose).expect("valid camera")
}

pub fn side_camera() -> PinholeCamera {
    let pose = RigidPose::look_at(Vec3::new(0.5, -1.2, 0.5), Vec3::new(0.4, 0.0, 0.15), Vec3::z());
    PinholeCamera::new(90.0, 90.0, 64.0, 48.0, 128, 96, pose).expect("valid camera")
}

/// Tool pointing straight down, slightly above the object origin.
pub fn top_down_offset(height: f64) -> RigidPose {
    RigidPose::new(UnitQuaternion::from_axis_angle(&Vec3::y_axis(), PI), Vec3::new(0.0, 0.0, height))
}

pub fn grasp_task() -> TaskSpec {
    let jitter = Jitter { translation: [[-0.02, 0.02], [-0.02, 0.02], [0.0, 0.0]], yaw: [-0.3, 0.3] };
    TaskSpec {
        kind: TaskKind::Grasp,
        target_object: "cube".into(),
        approach_offset: top_down_offset(0.01),
        goal_displacement: None,
        randomization: BTreeMap::from([("cube".to_string(), jitter), ("cylinder".to_string(), jitter)]),
        pregrasp_distance: 0.08,
    }
}

pub fn press_task() -> TaskSpec {
    TaskSpec {
        kind: TaskKind::Press,
        target_object: "cylinder".into(),
        approach_offset: top_down_offset(0.05),
        goal_displacement: None,
        randomization: BTreeMap::new(),
        pregrasp_distance: 0.06,
    }
}

pub fn push_task() -> TaskSpec {
    TaskSpec {
        kind: TaskKind::PushPull,
        target_object: "cube".into(),
        approach_offset: RigidPose::new(
            UnitQuaternion::from_axis_angle(&Vec3::y_axis(), PI),
            Vec3::new(-0.04, 0.0, 0.0),
        ),
        goal_displacement: Some(Vec3::new(0.06, 0.0, 0.0)),
        randomization: BTreeMap::new(),
        pregrasp_distance: 0.06,
    }
}

/// Similarities mapping each object's splat capture frame onto its mesh.
fn capture_alignment(seed: u64) -> Sim3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = Unit::new_normalize(Vec3::new(rng.random(), rng.random(), rng.random::<f64>() + 0.1));
    Sim3::new(
        rng.random_range(0.3..3.0),
        UnitQuaternion::from_axis_angle(&axis, rng.random_range(-PI..PI)),
        Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
    )
    .expect("positive scale")
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    std::fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

fn at(p: [f64; 3]) -> Sim3 {
    Sim3::from_translation(Vec3::from(p))
}

/// Writes every fixture file into `dir` and returns the manifest path.
/// The scene PLY is stored in a capture frame with `pre_align` mapping it
/// to the robot base; each object's splats are stored in their own
/// capture frame with `object_align` mapping them onto the mesh.
pub fn write_demo_scene(dir: &Path) -> Result<PathBuf, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;

    let pre_align = Sim3::new(1.0, UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 0.4), Vec3::new(0.2, -0.1, 0.0))
        .expect("unit scale");
    let room = apply_sim3(&room_splats(), &pre_align.inverse()).with_frame("capture");
    write(&dir.join("room.ply"), write_splat_ply(&room))?;

    let floor = TriMesh::cuboid(Vec3::new(3.0, 3.0, 0.02), "floor");
    write(&dir.join("floor.obj"), floor.to_obj_string())?;

    let shapes = [
        ("cube", TriMesh::cuboid(Vec3::repeat(0.05), "cube"), [0.85, 0.15, 0.12], CUBE_CENTER, 11),
        ("cylinder", TriMesh::cylinder(0.03, 0.08, 24, "cylinder"), [0.9, 0.8, 0.2], CYLINDER_CENTER, 12),
    ];
    let mut objects = Vec::new();
    for (name, mesh, color, center, seed) in shapes {
        let mesh_file = format!("{name}.obj");
        let splat_file = format!("{name}_splats.ply");
        write(&dir.join(&mesh_file), mesh.to_obj_string())?;
        let align = capture_alignment(seed);
        let captured = apply_sim3(&surface_splats(&mesh, 600, color, seed), &align.inverse());
        write(&dir.join(&splat_file), write_splat_ply(&captured))?;

        // residual as stored by the alignment step, measured on the files
        let reloaded = parse_splat_ply(&std::fs::read(dir.join(&splat_file)).map_err(|e| PipelineError::io(dir, e))?)
            .map_err(|e| PipelineError::Asset(e.to_string()))?;
        let mesh_back = TriMesh::load(&dir.join(&mesh_file)).map_err(|e| PipelineError::Asset(e.to_string()))?;
        let residual = splat_mesh_chamfer(&apply_sim3(&reloaded, &align), &mesh_back)?;
        objects.push(ObjectEntry {
            name: name.into(),
            splats: splat_file.into(),
            mesh: mesh_file.into(),
            object_align: align,
            placement: at(center),
            align_residual: residual,
        });
    }

    let (urdf, spheres) = serialize_chain(&demo_chain())?;
    write(&dir.join("arm.urdf"), urdf)?;
    write(&dir.join("arm_spheres.json"), spheres)?;

    let manifest = SceneManifest {
        scene: SceneEntry { splats: "room.ply".into(), pre_align: Some(pre_align) },
        objects,
        static_obstacles: vec![StaticObstacle {
            name: "floor".into(),
            mesh: "floor.obj".into(),
            pose: RigidPose::from_translation(Vec3::new(0.0, 0.0, -0.0101)),
        }],
        robot: RobotEntry {
            urdf: "arm.urdf".into(),
            spheres: Some("arm_spheres.json".into()),
            base_pose: RigidPose::identity(),
            home: Some(HOME.to_vec()),
        },
        cameras: vec![
            CameraEntry::from_camera("head", &head_camera()),
            CameraEntry::from_camera("side", &side_camera()),
        ],
        rng_seed: 7,
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.json");
    write(&path, manifest.to_json())?;
    write(&dir.join("task_grasp.json"), grasp_task().to_json())?;
    write(&dir.join("task_press.json"), press_task().to_json())?;
    write(&dir.join("task_push.json"), push_task().to_json())?;
    Ok(path)
}
