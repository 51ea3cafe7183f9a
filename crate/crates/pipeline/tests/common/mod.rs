#![allow(dead_code)]

use std::path::{Path, PathBuf};

use hybridsim_pipeline::{compose_world, fixture, load_manifest, Assets, SceneManifest, World};
use tempfile::TempDir;

/// The demo scene written into a fresh directory.
pub struct Demo {
    pub dir: TempDir,
    pub manifest_path: PathBuf,
    pub manifest: SceneManifest,
}

impl Demo {
    pub fn new() -> Demo {
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = fixture::write_demo_scene(dir.path()).unwrap();
        let manifest = load_manifest(&manifest_path).unwrap();
        Demo { dir, manifest_path, manifest }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn world(&self) -> (Assets, World) {
        compose_world(&self.manifest).unwrap()
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(&self.manifest_path).unwrap()).unwrap()
    }

    /// Parses an edited manifest document against the demo directory.
    pub fn parse(&self, v: &serde_json::Value) -> Result<SceneManifest, hybridsim_pipeline::ManifestError> {
        SceneManifest::from_json(&v.to_string(), self.path())
    }
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
