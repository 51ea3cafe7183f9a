//! Static 3-d tree for exact nearest-neighbour queries.
//!
//! Built once over a point slice; queries return the index into that slice.
//! Ties are resolved toward the lower index so results do not depend on
//! traversal order.

use crate::transform::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: &[Vec3]) -> Self {
        let mut tree = KdTree { points: points.to_vec(), order: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn nearest(&self, query: &Vec3) -> Option<Neighbor> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Neighbor { index: usize::MAX, dist_sq: f64::INFINITY };
        self.search(0, query, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut Neighbor) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if d < best.dist_sq || (d == best.dist_sq && i < best.index) {
                        *best = Neighbor { index: i, dist_sq: d };
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` keeps equal-distance candidates reachable for tie-breaking.
                if diff * diff <= best.dist_sq {
                    self.search(far, q, best);
                }
            }
        }
    }

    /// Median distance from each point to its nearest other point.
    pub fn median_spacing(&self) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let mut d: Vec<f64> = (0..self.points.len()).map(|i| self.nearest_excluding(i)).collect();
        let mid = d.len() / 2;
        d.select_nth_unstable_by(mid, f64::total_cmp);
        Some(d[mid])
    }

    fn nearest_excluding(&self, index: usize) -> f64 {
        let q = self.points[index];
        let mut best = f64::INFINITY;
        self.search_excluding(0, &q, index, &mut best);
        best.sqrt()
    }

    fn search_excluding(&self, node: usize, q: &Vec3, skip: usize, best: &mut f64) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if i != skip {
                        *best = best.min((self.points[i] - q).norm_squared());
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search_excluding(near, q, skip, best);
                if diff * diff <= *best {
                    self.search_excluding(far, q, skip, best);
                }
            }
        }
    }
}
