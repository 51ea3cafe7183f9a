//! Sphere-proxy collision queries against BVH-indexed triangle meshes.

use super::chain::KinematicChain;
use super::fk::forward_kinematics;
use super::KinError;
use crate::mesh::TriMesh;
use crate::transform::{RigidPose, Vec3};

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Aabb {
        Aabb { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn dist_sq(&self, p: &Vec3) -> f64 {
        let d = (self.min - p).sup(&(p - self.max)).sup(&Vec3::zeros());
        d.norm_squared()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Median-split AABB hierarchy over a mesh's triangles.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<[Vec3; 3]>,
}

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Bvh {
        let mut tris: Vec<[Vec3; 3]> = (0..mesh.triangles.len()).map(|t| mesh.triangle(t)).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            let n = tris.len();
            Self::build_node(&mut nodes, &mut tris, 0, n);
        }
        Bvh { nodes, tris }
    }

    fn build_node(nodes: &mut Vec<Node>, tris: &mut [[Vec3; 3]], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        for t in &tris[start..end] {
            t.iter().for_each(|p| bounds.grow(p));
        }
        let id = nodes.len();
        if end - start <= LEAF_SIZE {
            nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        nodes.push(Node::Leaf { bounds, start, end });
        let axis = (bounds.max - bounds.min).imax();
        let centroid = |t: &[Vec3; 3]| (t[0][axis] + t[1][axis] + t[2][axis]) / 3.0;
        let mid = (start + end) / 2;
        tris[start..end].select_nth_unstable_by(mid - start, |a, b| centroid(a).total_cmp(&centroid(b)));
        let left = Self::build_node(nodes, tris, start, mid);
        let right = Self::build_node(nodes, tris, mid, end);
        nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    /// Squared distance from `p` to the mesh, `+∞` for an empty mesh.
    pub fn distance_sq(&self, p: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        if self.nodes.is_empty() {
            return best;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds().dist_sq(p) >= best {
                continue;
            }
            match node {
                Node::Leaf { start, end, .. } => {
                    for t in &self.tris[*start..*end] {
                        let c = closest_point_on_triangle(p, &t[0], &t[1], &t[2]);
                        best = best.min((c - p).norm_squared());
                    }
                }
                Node::Inner { left, right, .. } => {
                    let (dl, dr) = (self.nodes[*left].bounds().dist_sq(p), self.nodes[*right].bounds().dist_sq(p));
                    // visit the nearer child first
                    if dl < dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct Obstacle {
    pub label: String,
    pub mesh: TriMesh,
    pub pose: RigidPose,
    bvh: Bvh,
}

impl Obstacle {
    pub fn new(label: impl Into<String>, mesh: TriMesh, pose: RigidPose) -> Obstacle {
        let bvh = Bvh::build(&mesh);
        Obstacle { label: label.into(), mesh, pose, bvh }
    }

    /// Distance from a world point to the placed mesh surface.
    pub fn distance(&self, p: &Vec3) -> f64 {
        let local = self.pose.inverse().transform_point(p);
        self.bvh.distance_sq(&local).sqrt()
    }

    /// Mesh vertices in the world frame.
    pub fn world_mesh(&self) -> TriMesh {
        self.mesh.transformed_rigid(&self.pose)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ObstacleSet {
    pub obstacles: Vec<Obstacle>,
}

impl ObstacleSet {
    pub fn new() -> ObstacleSet {
        ObstacleSet::default()
    }

    pub fn push(&mut self, label: impl Into<String>, mesh: TriMesh, pose: RigidPose) {
        self.obstacles.push(Obstacle::new(label, mesh, pose));
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&Obstacle> {
        self.obstacles.iter().find(|o| o.label == label)
    }

    /// Copy without the obstacles whose label is listed.
    pub fn without(&self, labels: &[&str]) -> ObstacleSet {
        ObstacleSet {
            obstacles: self.obstacles.iter().filter(|o| !labels.contains(&o.label.as_str())).cloned().collect(),
        }
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.obstacles.iter().map(|o| o.distance(p)).fold(f64::INFINITY, f64::min)
    }
}

/// World-frame collision spheres per link at configuration `q`.
pub fn link_spheres(chain: &KinematicChain, q: &[f64]) -> Result<Vec<Vec<(Vec3, f64)>>, KinError> {
    let fk = forward_kinematics(chain, q)?;
    Ok(fk
        .links
        .iter()
        .zip(&chain.spheres)
        .map(|(pose, ss)| ss.iter().map(|s| (pose.transform_point(&s.center), s.radius)).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearance {
    /// Smallest sphere-surface to obstacle distance.
    pub obstacle: f64,
    /// Smallest surface gap between spheres of links two or more apart.
    pub self_gap: f64,
}

impl Clearance {
    pub fn in_collision(&self) -> bool {
        self.obstacle <= 0.0 || self.self_gap <= 0.0
    }

    /// Per-sphere motion margin: self gaps shrink by the motion of both
    /// spheres, so they count half.
    pub fn margin(&self) -> f64 {
        self.obstacle.min(0.5 * self.self_gap)
    }
}

pub fn clearance(chain: &KinematicChain, q: &[f64], obstacles: &ObstacleSet) -> Result<Clearance, KinError> {
    let spheres = link_spheres(chain, q)?;
    let mut obstacle = f64::INFINITY;
    for (c, r) in spheres.iter().flatten() {
        obstacle = obstacle.min(obstacles.distance(c) - r);
    }
    let mut self_gap = f64::INFINITY;
    for i in 0..spheres.len() {
        for j in (i + 2)..spheres.len() {
            for (ci, ri) in &spheres[i] {
                for (cj, rj) in &spheres[j] {
                    self_gap = self_gap.min((ci - cj).norm() - ri - rj);
                }
            }
        }
    }
    Ok(Clearance { obstacle, self_gap })
}

/// True iff any link sphere touches an obstacle triangle or a sphere of a
/// non-adjacent link.
pub fn check_collision(chain: &KinematicChain, q: &[f64], obstacles: &ObstacleSet) -> Result<bool, KinError> {
    Ok(clearance(chain, q, obstacles)?.in_collision())
}
