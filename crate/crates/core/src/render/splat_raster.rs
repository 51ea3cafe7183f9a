//! EWA projection and tile-parallel front-to-back splat blending.

use nalgebra::{Matrix2, Matrix2x3, Vector2};
use rayon::prelude::*;

use super::camera::PinholeCamera;
use super::image::{Image, Mask};
use super::sh::eval_sh;
use crate::splat::{GaussianSplat, SplatSet};

pub const NEAR_PLANE: f64 = 0.01;
pub const LOW_PASS: f64 = 0.3;
pub const MAX_ALPHA: f64 = 0.99;
pub const MIN_TRANSMITTANCE: f64 = 1e-4;
/// Squared Mahalanobis radius of the evaluated footprint (3σ).
pub const SUPPORT_SQ: f64 = 9.0;
const TILE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat2D {
    pub mean2d: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
    pub depth: f64,
    pub color: [f64; 3],
    pub alpha: f64,
}

impl Splat2D {
    /// Half-extents of the 3σ ellipse's bounding box.
    fn extent(&self) -> (f64, f64) {
        ((SUPPORT_SQ * self.cov2d[(0, 0)]).sqrt(), (SUPPORT_SQ * self.cov2d[(1, 1)]).sqrt())
    }
}

pub fn project_gaussian(g: &GaussianSplat, cam: &PinholeCamera) -> Option<Splat2D> {
    let pc = cam.world_to_camera(&g.mean);
    if pc.z < NEAR_PLANE {
        return None;
    }
    let w = cam.pose.rotation.to_rotation_matrix().into_inner().transpose();
    let (x, y, z) = (pc.x, pc.y, pc.z);
    let j = Matrix2x3::new(cam.fx / z, 0.0, -cam.fx * x / (z * z), 0.0, cam.fy / z, -cam.fy * y / (z * z));
    let m = j * w;
    let mut cov2d = m * g.covariance().to_matrix() * m.transpose();
    cov2d = (cov2d + cov2d.transpose()) * 0.5;
    cov2d[(0, 0)] += LOW_PASS;
    cov2d[(1, 1)] += LOW_PASS;
    let dir = (g.mean - cam.center()).normalize();
    Some(Splat2D {
        mean2d: cam.project_camera_point(&pc),
        cov2d,
        depth: z,
        color: eval_sh(&g.sh, &dir),
        alpha: g.opacity(),
    })
}

struct Prepared {
    splat: Splat2D,
    conic: Matrix2<f64>,
}

fn blend_pixel(px: f64, py: f64, order: &[&Prepared]) -> ([f64; 3], f64) {
    let mut rgb = [0.0; 3];
    let mut t = 1.0;
    for p in order {
        let d = Vector2::new(px - p.splat.mean2d.x, py - p.splat.mean2d.y);
        let maha = (d.transpose() * p.conic * d)[(0, 0)];
        if maha > SUPPORT_SQ {
            continue;
        }
        let a = (p.splat.alpha * (-0.5 * maha).exp()).min(MAX_ALPHA);
        for k in 0..3 {
            rgb[k] += p.splat.color[k] * a * t;
        }
        t *= 1.0 - a;
        if t < MIN_TRANSMITTANCE {
            break;
        }
    }
    (rgb.map(|c| c.clamp(0.0, 1.0)), (1.0 - t).clamp(0.0, 1.0))
}

/// Renders `set` from `cam`, returning color and accumulated alpha.
/// Output is independent of the worker count: each pixel blends splats in
/// the global (depth, index) order.
pub fn render_splats(set: &SplatSet, cam: &PinholeCamera) -> (Image, Mask) {
    let (w, h) = (cam.width, cam.height);
    let mut prepared: Vec<(usize, Prepared)> = set
        .splats
        .par_iter()
        .enumerate()
        .filter_map(|(i, g)| {
            let s = project_gaussian(g, cam)?;
            let conic = s.cov2d.try_inverse()?;
            Some((i, Prepared { splat: s, conic }))
        })
        .collect();
    prepared.sort_by(|a, b| a.1.splat.depth.total_cmp(&b.1.splat.depth).then(a.0.cmp(&b.0)));

    let tiles_x = w.div_ceil(TILE);
    let tiles_y = h.div_ceil(TILE);
    let tiles: Vec<(usize, usize, Vec<[f64; 3]>, Vec<f64>)> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|tile| {
            let x0 = (tile % tiles_x) * TILE;
            let y0 = (tile / tiles_x) * TILE;
            let x1 = (x0 + TILE).min(w);
            let y1 = (y0 + TILE).min(h);
            // conservative overlap test; the exact ellipse test is per pixel
            let order: Vec<&Prepared> = prepared
                .iter()
                .map(|(_, p)| p)
                .filter(|p| {
                    let (ex, ey) = p.splat.extent();
                    let m = p.splat.mean2d;
                    m.x + ex + 1.0 >= x0 as f64
                        && m.x - ex - 1.0 <= x1 as f64
                        && m.y + ey + 1.0 >= y0 as f64
                        && m.y - ey - 1.0 <= y1 as f64
                })
                .collect();
            let mut rgb = Vec::with_capacity((x1 - x0) * (y1 - y0));
            let mut alpha = Vec::with_capacity(rgb.capacity());
            for y in y0..y1 {
                for x in x0..x1 {
                    let (c, a) = blend_pixel(x as f64 + 0.5, y as f64 + 0.5, &order);
                    rgb.push(c);
                    alpha.push(a);
                }
            }
            (x0, y0, rgb, alpha)
        })
        .collect();

    let mut image = Image::new(w, h);
    let mut mask = Mask::filled(w, h, 0.0);
    for (x0, y0, rgb, alpha) in tiles {
        let tw = (x0 + TILE).min(w) - x0;
        for (k, (c, a)) in rgb.into_iter().zip(alpha).enumerate() {
            let (x, y) = (x0 + k % tw, y0 + k / tw);
            image.rgb[y * w + x] = c;
            mask.values[y * w + x] = a;
        }
    }
    (image, mask)
}
