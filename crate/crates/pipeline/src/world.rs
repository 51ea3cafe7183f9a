//! Loading manifest assets and composing the splat world together with the
//! collision world.

use std::collections::BTreeMap;
use std::ops::Range;

use hybridsim_core::align::sample_mesh_points;
use hybridsim_core::cloud::chamfer_distance;
use hybridsim_core::kinematics::{parse_chain, KinematicChain, ObstacleSet};
use hybridsim_core::mesh::apply_placement_to_mesh;
use hybridsim_core::render::PinholeCamera;
use hybridsim_core::splat::{apply_sim3, merge, parse_splat_ply};
use hybridsim_core::{RigidPose, Sim3, SplatSet, TriMesh};

use crate::manifest::SceneManifest;
use crate::PipelineError;

/// Frame label of every composed splat set.
pub const WORLD_FRAME: &str = "robot_base";

#[derive(Debug, Clone)]
pub struct ObjectAsset {
    pub name: String,
    /// Splats already mapped into the mesh frame by `object_align`.
    pub splats: SplatSet,
    pub mesh: TriMesh,
    pub placement: Sim3,
    pub align_residual: f64,
}

/// Everything a manifest references, loaded once and shared read-only.
#[derive(Debug, Clone)]
pub struct Assets {
    pub scene: SplatSet,
    pub objects: Vec<ObjectAsset>,
    pub statics: Vec<(String, TriMesh, RigidPose)>,
    pub chain: KinematicChain,
    pub home: Vec<f64>,
    pub cameras: Vec<(String, PinholeCamera)>,
}

fn read(path: &std::path::Path) -> Result<Vec<u8>, PipelineError> {
    std::fs::read(path).map_err(|e| PipelineError::io(path, e))
}

fn load_ply(path: &std::path::Path) -> Result<SplatSet, PipelineError> {
    parse_splat_ply(&read(path)?).map_err(|e| PipelineError::Asset(format!("{}: {e}", path.display())))
}

fn load_mesh(path: &std::path::Path) -> Result<TriMesh, PipelineError> {
    TriMesh::load(path).map_err(|e| PipelineError::Asset(e.to_string()))
}

pub fn load_assets(m: &SceneManifest) -> Result<Assets, PipelineError> {
    let mut scene = load_ply(&m.resolve(&m.scene.splats))?;
    if let Some(pre) = &m.scene.pre_align {
        scene = apply_sim3(&scene, pre);
    }
    let scene = scene.with_frame(WORLD_FRAME);

    let mut objects = Vec::with_capacity(m.objects.len());
    for o in &m.objects {
        let raw = load_ply(&m.resolve(&o.splats))?;
        let mut mesh = load_mesh(&m.resolve(&o.mesh))?;
        mesh.label = o.name.clone();
        objects.push(ObjectAsset {
            name: o.name.clone(),
            splats: apply_sim3(&raw, &o.object_align).with_frame(WORLD_FRAME),
            mesh,
            placement: o.placement,
            align_residual: o.align_residual,
        });
    }

    let mut statics = Vec::new();
    for s in &m.static_obstacles {
        statics.push((s.name.clone(), load_mesh(&m.resolve(&s.mesh))?, s.pose));
    }

    let urdf = String::from_utf8(read(&m.resolve(&m.robot.urdf))?)
        .map_err(|e| PipelineError::Asset(format!("robot description is not UTF-8: {e}")))?;
    let sidecar = match &m.robot.spheres {
        Some(p) => Some(
            String::from_utf8(read(&m.resolve(p))?)
                .map_err(|e| PipelineError::Asset(format!("sphere sidecar is not UTF-8: {e}")))?,
        ),
        None => None,
    };
    let chain = parse_chain(&urdf, sidecar.as_deref())?;
    let home = match &m.robot.home {
        Some(h) => {
            chain.check_dof(h)?;
            if !chain.within_limits(h) {
                return Err(PipelineError::Asset("home configuration violates joint limits".into()));
            }
            h.clone()
        }
        None => {
            let mut z = vec![0.0; chain.dof()];
            chain.clamp(&mut z);
            z
        }
    };
    let cameras = m.cameras.iter().map(|c| (c.name.clone(), c.camera())).collect();
    Ok(Assets { scene, objects, statics, chain, home, cameras })
}

impl Assets {
    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }

    pub fn camera(&self, name: &str) -> Option<&PinholeCamera> {
        self.cameras.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn placements(&self) -> Vec<Sim3> {
        self.objects.iter().map(|o| o.placement).collect()
    }

    /// World splats for the given per-object placements, plus the index
    /// range each object occupies.
    pub fn compose_splats(&self, placements: &[Sim3]) -> (SplatSet, BTreeMap<String, Range<usize>>) {
        assert_eq!(placements.len(), self.objects.len());
        let mut sets = Vec::with_capacity(1 + self.objects.len());
        let mut ranges = BTreeMap::new();
        let mut start = self.scene.len();
        sets.push(self.scene.clone());
        for (o, p) in self.objects.iter().zip(placements) {
            ranges.insert(o.name.clone(), start..start + o.splats.len());
            start += o.splats.len();
            sets.push(apply_sim3(&o.splats, p));
        }
        let set = merge(&sets).expect("all parts share the world frame");
        (set.with_frame(WORLD_FRAME), ranges)
    }

    /// Placed object meshes in the world frame, keyed by object name.
    pub fn placed_meshes(&self, placements: &[Sim3]) -> Vec<TriMesh> {
        self.objects.iter().zip(placements).map(|(o, p)| apply_placement_to_mesh(&o.mesh, p)).collect()
    }

    pub fn compose_obstacles(&self, placements: &[Sim3]) -> ObstacleSet {
        let mut obstacles = ObstacleSet::new();
        for (name, mesh, pose) in &self.statics {
            obstacles.push(name.clone(), mesh.clone(), *pose);
        }
        for (o, mesh) in self.objects.iter().zip(self.placed_meshes(placements)) {
            obstacles.push(o.name.clone(), mesh, RigidPose::identity());
        }
        obstacles
    }

    pub fn compose(&self, placements: &[Sim3]) -> World {
        let (splats, object_ranges) = self.compose_splats(placements);
        World { splats, obstacles: self.compose_obstacles(placements), object_ranges, placements: placements.to_vec() }
    }
}

/// One composed scene: both representations driven by the same placements.
#[derive(Debug, Clone)]
pub struct World {
    pub splats: SplatSet,
    pub obstacles: ObstacleSet,
    pub object_ranges: BTreeMap<String, Range<usize>>,
    pub placements: Vec<Sim3>,
}

/// Composes the world exactly as the manifest describes it.
pub fn compose_world(m: &SceneManifest) -> Result<(Assets, World), PipelineError> {
    let assets = load_assets(m)?;
    let world = assets.compose(&assets.placements());
    Ok((assets, world))
}

/// Surface samples used when measuring splat/mesh agreement.
pub const COINCIDENCE_SAMPLES: usize = 2000;
const COINCIDENCE_SEED: u64 = 0x5eed;

/// Chamfer distance between splat means and uniform samples of the mesh
/// surface, both in the same frame.
pub fn splat_mesh_chamfer(splats: &SplatSet, mesh: &TriMesh) -> Result<f64, PipelineError> {
    let samples = sample_mesh_points(mesh, COINCIDENCE_SAMPLES, COINCIDENCE_SEED)
        .map_err(|e| PipelineError::Asset(format!("{}: {e}", mesh.label)))?;
    Ok(chamfer_distance(&splats.means(), &samples.points))
}

impl World {
    /// Splat/mesh Chamfer distance of one placed object in this world.
    pub fn coincidence(&self, assets: &Assets, object: usize) -> Result<f64, PipelineError> {
        let o = &assets.objects[object];
        let range = self.object_ranges[&o.name].clone();
        let placed = SplatSet::new(self.splats.splats[range].to_vec(), WORLD_FRAME);
        let mesh = apply_placement_to_mesh(&o.mesh, &self.placements[object]);
        splat_mesh_chamfer(&placed, &mesh)
    }
}
