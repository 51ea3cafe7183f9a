//! Declarative scene description: which assets to load, how each object is
//! aligned and placed, the robot, and the cameras.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use hybridsim_core::render::PinholeCamera;
use hybridsim_core::{RigidPose, Sim3};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Schema or invariant violation at a JSON pointer.
    #[error("{pointer}: {message}")]
    Field { pointer: String, message: String },
}

impl ManifestError {
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ManifestError::Field { pointer, .. } => Some(pointer),
            ManifestError::Io { .. } => None,
        }
    }

    fn field(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ManifestError::Field { pointer: pointer.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEntry {
    pub splats: PathBuf,
    /// Scene-to-robot-base similarity; absent when the scene is already in
    /// the robot base frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_align: Option<Sim3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub name: String,
    pub splats: PathBuf,
    pub mesh: PathBuf,
    /// Maps the object's splat frame onto its mesh frame.
    pub object_align: Sim3,
    /// Maps the mesh frame into the world.
    pub placement: Sim3,
    /// Chamfer distance (meters) between aligned splat means and mesh
    /// surface samples, recorded when `object_align` was estimated.
    #[serde(default)]
    pub align_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticObstacle {
    pub name: String,
    pub mesh: PathBuf,
    #[serde(default)]
    pub pose: RigidPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotEntry {
    pub urdf: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spheres: Option<PathBuf>,
    #[serde(default)]
    pub base_pose: RigidPose,
    /// Start configuration for every episode; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    pub name: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub pose: RigidPose,
}

impl CameraEntry {
    pub fn camera(&self) -> PinholeCamera {
        PinholeCamera {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            pose: self.pose,
        }
    }

    pub fn from_camera(name: impl Into<String>, c: &PinholeCamera) -> CameraEntry {
        CameraEntry {
            name: name.into(),
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            pose: c.pose,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub scene: SceneEntry,
    #[serde(default)]
    pub objects: Vec<ObjectEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub static_obstacles: Vec<StaticObstacle>,
    pub robot: RobotEntry,
    pub cameras: Vec<CameraEntry>,
    #[serde(default)]
    pub rng_seed: u64,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

impl SceneManifest {
    /// Parses and validates manifest text; relative paths resolve against
    /// `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<SceneManifest, ManifestError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut m: SceneManifest = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = pointer_of(e.path());
            ManifestError::field(pointer, e.into_inner().to_string())
        })?;
        m.base_dir = base_dir.to_path_buf();
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn object(&self, name: &str) -> Option<&ObjectEntry> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }

    pub fn camera(&self, name: &str) -> Option<PinholeCamera> {
        self.cameras.iter().find(|c| c.name == name).map(CameraEntry::camera)
    }

    pub fn head_camera(&self) -> PinholeCamera {
        self.camera("head").expect("validated manifest has a head camera")
    }

    /// Checks every invariant eagerly, including that referenced files
    /// exist.
    pub fn validate(&self) -> Result<(), ManifestError> {
        let exists = |p: &Path, pointer: String| {
            if self.resolve(p).is_file() {
                Ok(())
            } else {
                Err(ManifestError::field(pointer, format!("file not found: {}", self.resolve(p).display())))
            }
        };
        exists(&self.scene.splats, "/scene/splats".into())?;
        let mut names = HashSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            if o.name.is_empty() {
                return Err(ManifestError::field(format!("/objects/{i}/name"), "empty object name"));
            }
            if !names.insert(o.name.as_str()) {
                return Err(ManifestError::field(
                    format!("/objects/{i}/name"),
                    format!("duplicate object name {:?}", o.name),
                ));
            }
            if !(o.align_residual >= 0.0 && o.align_residual.is_finite()) {
                return Err(ManifestError::field(
                    format!("/objects/{i}/align_residual"),
                    "must be finite and non-negative",
                ));
            }
            exists(&o.splats, format!("/objects/{i}/splats"))?;
            exists(&o.mesh, format!("/objects/{i}/mesh"))?;
        }
        for (i, s) in self.static_obstacles.iter().enumerate() {
            exists(&s.mesh, format!("/static_obstacles/{i}/mesh"))?;
        }
        exists(&self.robot.urdf, "/robot/urdf".into())?;
        if let Some(s) = &self.robot.spheres {
            exists(s, "/robot/spheres".into())?;
        }
        if !self.robot.base_pose.approx_eq(&RigidPose::identity(), 1e-12) {
            return Err(ManifestError::field(
                "/robot/base_pose",
                "robot base defines the world frame and must be the identity",
            ));
        }
        let heads = self.cameras.iter().filter(|c| c.name == "head").count();
        if heads != 1 {
            return Err(ManifestError::field(
                "/cameras",
                format!("exactly one camera must be named \"head\", found {heads}"),
            ));
        }
        for (i, c) in self.cameras.iter().enumerate() {
            if let Err(e) = c.camera().validate() {
                return Err(ManifestError::field(format!("/cameras/{i}"), e.to_string()));
            }
        }
        Ok(())
    }

    /// Copy whose relative paths are rebased for a manifest stored in
    /// `dir`; absolute paths are kept.
    pub fn rebased(&self, dir: &Path) -> SceneManifest {
        if dir == self.base_dir {
            return self.clone();
        }
        let abs = |p: &Path| {
            let r = self.resolve(p);
            std::path::absolute(&r).unwrap_or(r)
        };
        let mut m = self.clone();
        m.scene.splats = abs(&self.scene.splats);
        for o in &mut m.objects {
            o.splats = abs(&o.splats);
            o.mesh = abs(&o.mesh);
        }
        for s in &mut m.static_obstacles {
            s.mesh = abs(&s.mesh);
        }
        m.robot.urdf = abs(&self.robot.urdf);
        m.robot.spheres = self.robot.spheres.as_deref().map(abs);
        m.base_dir = dir.to_path_buf();
        m
    }
}

pub fn load_manifest(path: &Path) -> Result<SceneManifest, ManifestError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    SceneManifest::from_json(&text, &dir)
}

/// Writes the manifest to `path`, rebasing relative asset paths when the
/// directory changes.
pub fn save_manifest(manifest: &SceneManifest, path: &Path) -> Result<(), ManifestError> {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = manifest.rebased(&dir);
    let tmp = path.with_extension("json.tmp");
    let io = |source| ManifestError::Io { path: path.to_path_buf(), source };
    std::fs::write(&tmp, m.to_json()).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
