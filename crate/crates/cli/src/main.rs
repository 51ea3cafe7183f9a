//! `hybridsim`: every pipeline stage from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hybridsim_core::align::{
    hand_eye_tsai_lenz, motion_pairs, sample_mesh_points, scaled_icp, umeyama_sim3, HandEyeMode, IcpParams, Station,
};
use hybridsim_core::cloud::CropBox;
use hybridsim_core::kinematics::JointTrajectory;
use hybridsim_core::render::render_splats;
use hybridsim_core::splat::{apply_sim3, parse_splat_ply, write_splat_ply};
use hybridsim_core::{PointCloud, Sim3, TriMesh, Vec3};
use hybridsim_pipeline::world::splat_mesh_chamfer;
use hybridsim_pipeline::{
    compose_world, fixture, generate_dataset, load_manifest, plan_episode, render_frame, save_manifest, TaskSpec,
};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "hybridsim", version, about = "Hybrid splat/mesh scene tools")]
struct Cli {
    /// Scene manifest (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory; stdout for JSON results when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the similarity taking a scene cloud into the robot frame.
    AlignScene {
        /// Scene splats (.ply) or points (.xyz).
        #[arg(long)]
        source: PathBuf,
        /// Robot-frame points (.xyz) or splats (.ply).
        #[arg(long)]
        target: PathBuf,
        /// Crop box JSON `{min, max}` applied to the source cloud.
        #[arg(long)]
        crop: Option<PathBuf>,
        /// Initial similarity JSON.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Correspondences JSON `{source: [[x,y,z]..], target: [..]}` for
        /// the initial estimate.
        #[arg(long)]
        keypoints: Option<PathBuf>,
    },
    /// Estimate the similarity taking object splats onto their mesh.
    AlignObject {
        #[arg(long)]
        splats: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        keypoints: Option<PathBuf>,
        #[arg(long)]
        init: Option<PathBuf>,
        /// Store the result on this manifest object (requires --config).
        #[arg(long)]
        object: Option<String>,
    },
    /// Hand-eye calibration from logged stations.
    Calibrate {
        #[arg(long)]
        stations: PathBuf,
        #[arg(long, default_value = "eye-to-hand")]
        mode: String,
    },
    /// Write the composed splat world and obstacle meshes.
    Compose,
    /// Render one camera view of the composed world.
    Render {
        #[arg(long, default_value = "head")]
        camera: String,
        /// Integer downsampling factor.
        #[arg(long, default_value_t = 1)]
        down: usize,
        /// Composite the robot at its home configuration.
        #[arg(long)]
        with_robot: bool,
    },
    /// Plan one task episode and write its joint trajectory.
    Plan {
        #[arg(long)]
        task: PathBuf,
    },
    /// Generate a dataset of episodes with seeds `seed + i`.
    Generate {
        #[arg(long)]
        task: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "head")]
        camera: String,
    },
    /// Write a small synthetic scene, robot and tasks to `--out`.
    Demo,
    /// Start the preview service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
    },
}

#[derive(Deserialize)]
struct Keypoints {
    source: Vec<[f64; 3]>,
    target: Vec<[f64; 3]>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_cloud(path: &Path) -> Result<PointCloud> {
    let label = path.display().to_string();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) {
        let set = parse_splat_ply(&std::fs::read(path)?).with_context(|| format!("reading {label}"))?;
        Ok(PointCloud::new(set.means(), label)?)
    } else {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {label}"))?;
        Ok(PointCloud::from_xyz_str(&text, label)?)
    }
}

fn initial_guess(init: Option<&Path>, keypoints: Option<&Path>) -> Result<Sim3> {
    match (init, keypoints) {
        (Some(_), Some(_)) => bail!("--init and --keypoints are mutually exclusive"),
        (Some(p), None) => read_json(p),
        (None, Some(p)) => {
            let kp: Keypoints = read_json(p)?;
            let src: Vec<Vec3> = kp.source.iter().map(|v| Vec3::from(*v)).collect();
            let dst: Vec<Vec3> = kp.target.iter().map(|v| Vec3::from(*v)).collect();
            Ok(umeyama_sim3(&src, &dst)?)
        }
        (None, None) => Ok(Sim3::identity()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().with_context(|| format!("--{flag} is required for this command"))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let out = cli.out.as_deref();
    match &cli.cmd {
        Command::AlignScene { source, target, crop, init, keypoints } => {
            let mut src = load_cloud(source)?;
            if let Some(c) = crop {
                let crop: CropBox = read_json(c)?;
                src = src.cropped(&crop);
            }
            let dst = load_cloud(target)?;
            let init = initial_guess(init.as_deref(), keypoints.as_deref())?;
            let r = scaled_icp(&src, &dst, &init, &IcpParams::default())?;
            eprintln!("residual {:.6e} after {} iterations", r.residual, r.iterations);
            emit(out, &serde_json::to_string_pretty(&r.transform)?)?;
        }
        Command::AlignObject { splats, mesh, keypoints, init, object } => {
            let set =
                parse_splat_ply(&std::fs::read(splats)?).with_context(|| format!("reading {}", splats.display()))?;
            let mesh = TriMesh::load(mesh)?;
            let src = PointCloud::new(set.means(), "splats")?;
            let dst = sample_mesh_points(&mesh, 4 * set.len().max(500), cli.seed)?;
            let init = initial_guess(init.as_deref(), keypoints.as_deref())?;
            let r = scaled_icp(&src, &dst, &init, &IcpParams::default())?;
            let residual = splat_mesh_chamfer(&apply_sim3(&set, &r.transform), &mesh)?;
            eprintln!("chamfer residual {residual:.6e} m after {} iterations", r.iterations);
            if let Some(name) = object {
                let path = need(&cli.config, "config")?;
                let mut m = load_manifest(path)?;
                let i = m.object_index(name).with_context(|| format!("no object {name:?} in manifest"))?;
                m.objects[i].object_align = r.transform;
                m.objects[i].align_residual = residual;
                save_manifest(&m, path)?;
            }
            emit(out, &serde_json::to_string_pretty(&r.transform)?)?;
        }
        Command::Calibrate { stations, mode } => {
            let mode = match mode.as_str() {
                "eye-to-hand" => HandEyeMode::EyeToHand,
                "eye-in-hand" => HandEyeMode::EyeInHand,
                other => bail!("unknown mode {other:?}; expected eye-to-hand or eye-in-hand"),
            };
            let stations: Vec<Station> = read_json(stations)?;
            let sol = hand_eye_tsai_lenz(&motion_pairs(&stations, mode))?;
            eprintln!(
                "rotation residual {:.3e} rad, translation residual {:.3e} m",
                sol.rotation_residual, sol.translation_residual
            );
            emit(out, &serde_json::to_string_pretty(&sol.transform)?)?;
        }
        Command::Compose => {
            let m = load_manifest(need(&cli.config, "config")?)?;
            let dir = need(&cli.out, "out")?;
            let (_, world) = compose_world(&m)?;
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("world.ply"), write_splat_ply(&world.splats))?;
            for o in &world.obstacles.obstacles {
                std::fs::write(dir.join(format!("obstacle_{}.obj", o.label)), o.world_mesh().to_obj_string())?;
            }
            eprintln!(
                "{} splats, {} obstacles written to {}",
                world.splats.len(),
                world.obstacles.len(),
                dir.display()
            );
        }
        Command::Render { camera, down, with_robot } => {
            let m = load_manifest(need(&cli.config, "config")?)?;
            let path = need(&cli.out, "out")?;
            let cam = m.camera(camera).with_context(|| format!("unknown camera {camera:?}"))?.downsampled(*down)?;
            let (assets, world) = compose_world(&m)?;
            let img = if *with_robot {
                render_frame(&assets.chain, &world.splats, &assets.home, &cam)?
            } else {
                render_splats(&world.splats, &cam).0
            };
            img.save_png(path)?;
        }
        Command::Plan { task } => {
            let m = load_manifest(need(&cli.config, "config")?)?;
            let task = TaskSpec::load(task)?;
            let (assets, _) = compose_world(&m)?;
            let plan = plan_episode(&assets, &task, cli.seed)?;
            if let Some(stage) = &plan.meta.failure_stage {
                bail!("planning failed at stage {stage}: {}", plan.meta.failure_reason.as_deref().unwrap_or(""));
            }
            let traj =
                JointTrajectory { dt: plan.meta.dt, waypoints: plan.actions.iter().map(|a| a.q.clone()).collect() };
            eprintln!(
                "{} waypoints, success predicate {}",
                traj.len(),
                if plan.meta.success { "met" } else { "missed" }
            );
            emit(out, &traj.to_json())?;
        }
        Command::Generate { task, count, workers, camera } => {
            let m = load_manifest(need(&cli.config, "config")?)?;
            let dir = need(&cli.out, "out")?;
            let task = TaskSpec::load(task)?;
            let (assets, _) = compose_world(&m)?;
            let index = generate_dataset(&assets, &task, camera, *count, cli.seed, *workers, dir)?;
            eprintln!("{} of {} episodes succeeded; written to {}", index.successes, index.total, dir.display());
        }
        Command::Demo => {
            let dir = need(&cli.out, "out")?;
            let manifest = fixture::write_demo_scene(dir)?;
            eprintln!("demo scene written; manifest at {}", manifest.display());
        }
        Command::Serve { addr } => {
            let state = hybridsim_service::AppState::load(need(&cli.config, "config")?)?;
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("serving on http://{addr}");
            rt.block_on(hybridsim_service::serve(state, *addr))?;
        }
    }
    Ok(())
}
