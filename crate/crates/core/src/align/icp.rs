//! Scaled ICP: nearest-neighbour correspondences alternating with the
//! closed-form similarity update.

use super::{umeyama_sim3, AlignError};
use crate::cloud::PointCloud;
use crate::spatial::KdTree;
use crate::transform::{Sim3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Relative residual change below which iteration stops.
    pub convergence_eps: f64,
    /// Correspondence gate in meters; `None` derives it as ten times the
    /// destination cloud's median nearest-neighbour spacing.
    pub max_correspondence_dist: Option<f64>,
    /// Fraction of the worst gated correspondences discarded, in `[0, 0.5)`.
    pub trim_fraction: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self { max_iterations: 50, convergence_eps: 1e-8, max_correspondence_dist: None, trim_fraction: 0.1 }
    }
}

impl IcpParams {
    fn validate(&self) -> Result<(), AlignError> {
        if self.max_iterations == 0 {
            return Err(AlignError::InvalidParams("max_iterations must be positive"));
        }
        if !(self.convergence_eps >= 0.0) {
            return Err(AlignError::InvalidParams("convergence_eps must be non-negative"));
        }
        if let Some(g) = self.max_correspondence_dist {
            if !(g > 0.0) {
                return Err(AlignError::InvalidParams("max_correspondence_dist must be positive"));
            }
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err(AlignError::InvalidParams("trim_fraction must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    pub transform: Sim3,
    /// Mean squared distance over the retained correspondences at
    /// `transform`.
    pub residual: f64,
    /// Residual after each accepted step; entry 0 is the initial transform.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gate: f64,
}

struct Matches {
    src: Vec<Vec3>,
    dst: Vec<Vec3>,
    residual: f64,
}

fn correspond(src: &[Vec3], dst: &[Vec3], tree: &KdTree, t: &Sim3, gate_sq: f64, trim: f64) -> Option<Matches> {
    let mut pairs: Vec<(f64, usize, usize)> = src
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let nn = tree.nearest(&t.transform_point(p))?;
            (nn.dist_sq <= gate_sq).then_some((nn.dist_sq, i, nn.index))
        })
        .collect();
    if pairs.is_empty() {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keep = ((pairs.len() as f64) * (1.0 - trim)).ceil() as usize;
    pairs.truncate(keep.max(1));
    let residual = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
    Some(Matches {
        src: pairs.iter().map(|p| src[p.1]).collect(),
        dst: pairs.iter().map(|p| dst[p.2]).collect(),
        residual,
    })
}

/// Estimates `S` minimizing `Σ‖S(src_i) − dst_nn(i)‖²` starting from
/// `init`. A step is only accepted when it lowers the residual, so the
/// residual history is non-increasing.
pub fn scaled_icp(
    src: &PointCloud,
    dst: &PointCloud,
    init: &Sim3,
    params: &IcpParams,
) -> Result<IcpResult, AlignError> {
    params.validate()?;
    if src.is_empty() || dst.is_empty() {
        return Err(AlignError::EmptyCloud);
    }
    let tree = KdTree::build(&dst.points);
    let gate = match params.max_correspondence_dist {
        Some(g) => g,
        None => 10.0 * tree.median_spacing().filter(|s| *s > 0.0).unwrap_or(1.0),
    };
    let gate_sq = gate * gate;

    let mut current = *init;
    let mut matches = correspond(&src.points, &dst.points, &tree, &current, gate_sq, params.trim_fraction)
        .ok_or(AlignError::NoCorrespondences { gate })?;
    let mut history = vec![matches.residual];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iterations {
        iterations += 1;
        if matches.residual == 0.0 {
            converged = true;
            break;
        }
        let step = match umeyama_sim3(&matches.src, &matches.dst) {
            Ok(s) => s,
            Err(_) => break,
        };
        let Some(next) = correspond(&src.points, &dst.points, &tree, &step, gate_sq, params.trim_fraction) else {
            break;
        };
        if next.residual > matches.residual {
            // rejecting keeps the residual sequence monotone
            converged = true;
            break;
        }
        let rel = (matches.residual - next.residual) / matches.residual.max(f64::MIN_POSITIVE);
        current = step;
        matches = next;
        history.push(matches.residual);
        if rel <= params.convergence_eps {
            converged = true;
            break;
        }
    }

    Ok(IcpResult { transform: current, residual: matches.residual, history, iterations, converged, gate })
}
