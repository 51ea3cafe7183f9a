use serde::{Deserialize, Serialize};

use crate::spatial::KdTree;
use crate::transform::{Sim3, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CloudError {
    #[error("point {index} is not finite")]
    NonFinite { index: usize },
    #[error("line {line}: expected three numbers")]
    Parse { line: usize },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub label: String,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, label: impl Into<String>) -> Result<Self, CloudError> {
        if let Some(index) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(CloudError::NonFinite { index });
        }
        Ok(Self { points, label: label.into() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
        Some(sum / self.points.len() as f64)
    }

    /// Maps every point by `p ↦ s·R·p + t`.
    pub fn transformed(&self, s: &Sim3) -> PointCloud {
        PointCloud { points: self.points.iter().map(|p| s.transform_point(p)).collect(), label: self.label.clone() }
    }

    pub fn cropped(&self, crop: &CropBox) -> PointCloud {
        PointCloud {
            points: self.points.iter().filter(|p| crop.contains(p)).copied().collect(),
            label: self.label.clone(),
        }
    }

    /// Reads whitespace-separated `x y z` lines; `#` starts a comment and
    /// extra columns (colors, normals) are ignored.
    pub fn from_xyz_str(text: &str, label: impl Into<String>) -> Result<Self, CloudError> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .take(3)
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CloudError::Parse { line: i + 1 })?;
            if vals.len() < 3 {
                return Err(CloudError::Parse { line: i + 1 });
            }
            points.push(Vec3::new(vals[0], vals[1], vals[2]));
        }
        PointCloud::new(points, label)
    }

    pub fn to_xyz_string(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 32);
        for p in &self.points {
            out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
        }
        out
    }
}

/// Transforms every point of `cloud` by the similarity `s`.
pub fn transform_points(cloud: &PointCloud, s: &Sim3) -> PointCloud {
    cloud.transformed(s)
}

/// Axis-aligned crop region, JSON `{min: [x,y,z], max: [x,y,z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl CropBox {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Symmetric Chamfer distance: the mean nearest-neighbour distance from
/// `a` to `b` averaged with the one from `b` to `a`.
pub fn chamfer_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let ta = KdTree::build(a);
    let tb = KdTree::build(b);
    let ab: f64 =
        a.iter().map(|p| tb.nearest(p).map(|n| n.dist_sq.sqrt()).unwrap_or(0.0)).sum::<f64>() / a.len() as f64;
    let ba: f64 =
        b.iter().map(|p| ta.nearest(p).map(|n| n.dist_sq.sqrt()).unwrap_or(0.0)).sum::<f64>() / b.len() as f64;
    0.5 * (ab + ba)
}
