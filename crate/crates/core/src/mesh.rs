//! Triangle meshes: loading (STL, OBJ), primitive builders, placement.

use std::io::Cursor;
use std::path::Path;

use crate::transform::{RigidPose, Sim3, Vec3};

const DEGENERATE_AREA: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("io error reading `{path}`: {reason}")]
    Io { path: String, reason: String },
    #[error("unsupported mesh format `{0}` (expected .stl or .obj)")]
    Format(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("triangle {triangle} references vertex {index} but mesh has {count}")]
    IndexOutOfRange { triangle: usize, index: usize, count: usize },
    #[error("non-finite vertex {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub label: String,
}

impl TriMesh {
    /// Validates indices and drops zero-area triangles.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>, label: impl Into<String>) -> Result<Self, MeshError> {
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MeshError::NonFinite(i));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &index in tri {
                if index >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange { triangle: t, index, count: vertices.len() });
                }
            }
        }
        let mut mesh = TriMesh { vertices, triangles, label: label.into() };
        mesh.triangles.retain(|tri| {
            let [a, b, c] = tri.map(|i| mesh.vertices[i]);
            0.5 * (b - a).cross(&(c - a)).norm() > DEGENERATE_AREA
        });
        Ok(mesh)
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn centroid(&self) -> Vec3 {
        if self.vertices.is_empty() {
            return Vec3::zeros();
        }
        self.vertices.iter().fold(Vec3::zeros(), |a, v| a + v) / self.vertices.len() as f64
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))))
    }

    /// Maps every vertex by `x′ = s·R·x + t`; topology is unchanged.
    pub fn transformed(&self, s: &Sim3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| s.transform_point(v)).collect(),
            triangles: self.triangles.clone(),
            label: self.label.clone(),
        }
    }

    pub fn transformed_rigid(&self, pose: &RigidPose) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| pose.transform_point(v)).collect(),
            triangles: self.triangles.clone(),
            label: self.label.clone(),
        }
    }

    /// Concatenates meshes into one, offsetting indices.
    pub fn concat<'a>(meshes: impl IntoIterator<Item = &'a TriMesh>, label: &str) -> TriMesh {
        let mut out = TriMesh { label: label.to_string(), ..Default::default() };
        for m in meshes {
            let base = out.vertices.len();
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
        }
        out
    }

    pub fn load(path: &Path) -> Result<TriMesh, MeshError> {
        let bytes = std::fs::read(path)
            .map_err(|e| MeshError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
        match ext.as_str() {
            "stl" => Self::from_stl_bytes(&bytes, label),
            "obj" => Self::from_obj_bytes(&bytes, label),
            other => Err(MeshError::Format(other.to_string())),
        }
    }

    /// ASCII or binary STL; coincident vertices are merged by the reader.
    pub fn from_stl_bytes(bytes: &[u8], label: impl Into<String>) -> Result<TriMesh, MeshError> {
        let indexed = stl_io::read_stl(&mut Cursor::new(bytes)).map_err(|e| MeshError::Parse(format!("stl: {e}")))?;
        let vertices = indexed.vertices.iter().map(|v| Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64)).collect();
        let triangles = indexed.faces.iter().map(|f| f.vertices).collect();
        TriMesh::new(vertices, triangles, label)
    }

    /// OBJ with polygon faces fan-triangulated; materials are ignored.
    pub fn from_obj_bytes(bytes: &[u8], label: impl Into<String>) -> Result<TriMesh, MeshError> {
        let opts = tobj::LoadOptions { triangulate: true, single_index: true, ..Default::default() };
        let (models, _) = tobj::load_obj_buf(&mut Cursor::new(bytes), &opts, |_| Ok((Vec::new(), Default::default())))
            .map_err(|e| MeshError::Parse(format!("obj: {e}")))?;
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for model in models {
            let m = model.mesh;
            let base = vertices.len();
            vertices.extend(m.positions.chunks_exact(3).map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)));
            triangles.extend(
                m.indices.chunks_exact(3).map(|t| [t[0] as usize + base, t[1] as usize + base, t[2] as usize + base]),
            );
        }
        TriMesh::new(vertices, triangles, label)
    }

    pub fn to_obj_string(&self) -> String {
        let mut out = format!("# {}\no {}\n", self.label, sanitize(&self.label));
        for v in &self.vertices {
            out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for t in &self.triangles {
            out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        out
    }

    /// Axis-aligned box centered at the origin with full extents `size`.
    pub fn cuboid(size: Vec3, label: impl Into<String>) -> TriMesh {
        let h = size * 0.5;
        let vertices = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { -h.x } else { h.x },
                    if i & 2 == 0 { -h.y } else { h.y },
                    if i & 4 == 0 { -h.z } else { h.z },
                )
            })
            .collect();
        // outward-facing, counter-clockwise
        let triangles = vec![
            [0, 2, 1],
            [1, 2, 3], // -z
            [4, 5, 6],
            [5, 7, 6], // +z
            [0, 1, 4],
            [1, 5, 4], // -y
            [2, 6, 3],
            [3, 6, 7], // +y
            [0, 4, 2],
            [2, 4, 6], // -x
            [1, 3, 5],
            [3, 7, 5], // +x
        ];
        TriMesh { vertices, triangles, label: label.into() }
    }

    /// Closed cylinder along z, centered at the origin.
    pub fn cylinder(radius: f64, length: f64, segments: usize, label: impl Into<String>) -> TriMesh {
        let n = segments.max(3);
        let h = 0.5 * length;
        let mut vertices = vec![Vec3::new(0.0, 0.0, -h), Vec3::new(0.0, 0.0, h)];
        for k in 0..n {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            let (s, c) = a.sin_cos();
            vertices.push(Vec3::new(radius * c, radius * s, -h));
            vertices.push(Vec3::new(radius * c, radius * s, h));
        }
        let mut triangles = Vec::with_capacity(4 * n);
        for k in 0..n {
            let b0 = 2 + 2 * k;
            let t0 = b0 + 1;
            let b1 = 2 + 2 * ((k + 1) % n);
            let t1 = b1 + 1;
            triangles.push([0, b1, b0]);
            triangles.push([1, t0, t1]);
            triangles.push([b0, b1, t0]);
            triangles.push([t0, b1, t1]);
        }
        TriMesh { vertices, triangles, label: label.into() }
    }

    /// Latitude/longitude sphere centered at the origin.
    pub fn uv_sphere(radius: f64, rings: usize, segments: usize, label: impl Into<String>) -> TriMesh {
        let rings = rings.max(2);
        let segments = segments.max(3);
        let mut vertices = vec![Vec3::new(0.0, 0.0, radius)];
        for r in 1..rings {
            let phi = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let theta = std::f64::consts::TAU * s as f64 / segments as f64;
                vertices.push(radius * Vec3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()));
            }
        }
        vertices.push(Vec3::new(0.0, 0.0, -radius));
        let south = vertices.len() - 1;
        let ring = |r: usize, s: usize| 1 + (r - 1) * segments + (s % segments);
        let mut triangles = Vec::new();
        for s in 0..segments {
            triangles.push([0, ring(1, s), ring(1, s + 1)]);
            triangles.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
        }
        for r in 1..rings - 1 {
            for s in 0..segments {
                let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s), ring(r + 1, s + 1));
                triangles.push([a, c, b]);
                triangles.push([b, c, d]);
            }
        }
        TriMesh { vertices, triangles, label: label.into() }
    }
}

/// Places a mesh by a similarity transform, vertex by vertex.
pub fn apply_placement_to_mesh(mesh: &TriMesh, place: &Sim3) -> TriMesh {
    mesh.transformed(place)
}

fn sanitize(label: &str) -> String {
    let s: String =
        label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect();
    if s.is_empty() {
        "mesh".into()
    } else {
        s
    }
}
