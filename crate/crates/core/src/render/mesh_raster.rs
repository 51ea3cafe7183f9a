//! Z-buffered triangle rasterizer with headlight Lambert shading.

use nalgebra::Vector2;

use super::camera::PinholeCamera;
use super::image::{DepthMap, Image, Mask};
use super::splat_raster::NEAR_PLANE;
use crate::mesh::TriMesh;
use crate::transform::{RigidPose, Vec3};

const AMBIENT: f64 = 0.15;

#[derive(Debug, Clone, Copy)]
pub struct MeshInstance<'a> {
    pub mesh: &'a TriMesh,
    pub pose: RigidPose,
    pub color: [f64; 3],
}

/// Sutherland–Hodgman clip of a camera-space triangle against `z ≥ near`.
fn clip_near(tri: [Vec3; 3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let (ina, inb) = (a.z >= NEAR_PLANE, b.z >= NEAR_PLANE);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = (NEAR_PLANE - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * t;
            p.z = NEAR_PLANE;
            out.push(p);
        }
    }
    out
}

fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

struct Target {
    image: Image,
    mask: Mask,
    depth: DepthMap,
}

fn raster_triangle(cam: &PinholeCamera, v: [Vec3; 3], color: [f64; 3], target: &mut Target) {
    let n = (v[1] - v[0]).cross(&(v[2] - v[0]));
    let centroid = (v[0] + v[1] + v[2]) / 3.0;
    let (Some(n), Some(view)) = (n.try_normalize(1e-300), centroid.try_normalize(1e-300)) else {
        return;
    };
    let shade = AMBIENT + (1.0 - AMBIENT) * n.dot(&view).abs();
    let rgb = color.map(|c| (c * shade).clamp(0.0, 1.0));

    let s: [Vector2<f64>; 3] = v.map(|p| cam.project_camera_point(&p));
    let area = edge(&s[0], &s[1], &s[2]);
    if area == 0.0 {
        return;
    }
    let lo_x = s.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let hi_x = s.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let lo_y = s.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let hi_y = s.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let (w, h) = (cam.width as f64, cam.height as f64);
    if hi_x < 0.0 || hi_y < 0.0 || lo_x > w || lo_y > h {
        return;
    }
    let x_start = (lo_x - 0.5).ceil().max(0.0) as usize;
    let x_end = ((hi_x - 0.5).floor().min(w - 1.0)).max(-1.0);
    let y_start = (lo_y - 0.5).ceil().max(0.0) as usize;
    let y_end = ((hi_y - 0.5).floor().min(h - 1.0)).max(-1.0);
    if x_end < 0.0 || y_end < 0.0 {
        return;
    }
    let inv_z = v.map(|p| 1.0 / p.z);
    for y in y_start..=y_end as usize {
        for x in x_start..=x_end as usize {
            let p = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let b0 = edge(&s[1], &s[2], &p) / area;
            let b1 = edge(&s[2], &s[0], &p) / area;
            let b2 = edge(&s[0], &s[1], &p) / area;
            if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                continue;
            }
            // 1/z is affine in screen space
            let z = 1.0 / (b0 * inv_z[0] + b1 * inv_z[1] + b2 * inv_z[2]);
            let idx = y * cam.width + x;
            if z < target.depth.depth[idx] {
                target.depth.depth[idx] = z;
                target.image.rgb[idx] = rgb;
                target.mask.values[idx] = 1.0;
            }
        }
    }
}

/// Rasterizes posed meshes; mask is 1 where a triangle covers the pixel
/// center, depth is camera-space z of the nearest hit.
pub fn rasterize_meshes(instances: &[MeshInstance<'_>], cam: &PinholeCamera) -> (Image, Mask, DepthMap) {
    let (w, h) = (cam.width, cam.height);
    let mut target = Target { image: Image::new(w, h), mask: Mask::filled(w, h, 0.0), depth: DepthMap::empty(w, h) };
    for inst in instances {
        let to_cam = cam.pose.inverse().compose(&inst.pose);
        let verts: Vec<Vec3> = inst.mesh.vertices.iter().map(|p| to_cam.transform_point(p)).collect();
        for t in &inst.mesh.triangles {
            let poly = clip_near([verts[t[0]], verts[t[1]], verts[t[2]]]);
            for k in 1..poly.len().saturating_sub(1) {
                raster_triangle(cam, [poly[0], poly[k], poly[k + 1]], inst.color, &mut target);
            }
        }
    }
    (target.image, target.mask, target.depth)
}
