//! Reference computations written independently of the library.

use hybridsim_core::render::PinholeCamera;
use hybridsim_core::{GaussianSplat, Sim3, SplatSet, Vec3};
use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2};

pub fn quat_matrix([w, x, y, z]: [f64; 4]) -> Matrix3<f64> {
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

pub fn wxyz(g: &GaussianSplat) -> [f64; 4] {
    let q = g.rotation.quaternion();
    [q.w, q.i, q.j, q.k]
}

/// Covariance rebuilt from the stored rotation and log-scales.
pub fn covariance(g: &GaussianSplat) -> Matrix3<f64> {
    let r = quat_matrix(wxyz(g));
    r * Matrix3::from_diagonal(&g.log_scales.map(|l| (2.0 * l).exp())) * r.transpose()
}

pub fn density(g: &GaussianSplat, x: &Vec3) -> f64 {
    let d = x - g.mean;
    (-0.5 * d.dot(&(covariance(g).try_inverse().unwrap() * d))).exp()
}

/// `s R p + t` from the stored fields.
pub fn apply(s: &Sim3, p: &Vec3) -> Vec3 {
    let q = s.rotation().quaternion();
    s.scale() * (quat_matrix([q.w, q.i, q.j, q.k]) * p) + s.translation()
}

/// Largest entrywise gap between two splats' parameters, quaternions
/// compared up to sign.
pub fn param_gap(a: &GaussianSplat, b: &GaussianSplat) -> f64 {
    let (qa, qb) = (wxyz(a), wxyz(b));
    let same = (0..4).map(|k| (qa[k] - qb[k]).abs()).fold(0.0, f64::max);
    let flip = (0..4).map(|k| (qa[k] + qb[k]).abs()).fold(0.0, f64::max);
    (a.mean - b.mean)
        .amax()
        .max((a.log_scales - b.log_scales).amax())
        .max(same.min(flip))
        .max((a.opacity_logit - b.opacity_logit).abs())
}

const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;

/// View-dependent colour for SH degrees 0 and 1.
pub fn sh_color(g: &GaussianSplat, dir: &Vec3) -> [f64; 3] {
    let c = g.sh.coefficients();
    assert!(c.len() <= 4, "oracle covers degrees 0 and 1");
    [0, 1, 2].map(|k| {
        let mut v = 0.5 + SH_C0 * c[0][k];
        if c.len() > 1 {
            v += SH_C1 * (-dir.y * c[1][k] + dir.z * c[2][k] - dir.x * c[3][k]);
        }
        v
    })
}

/// Per-pixel brute-force splatting: every splat at every pixel, in
/// (depth, index) order.
pub fn render(set: &SplatSet, cam: &PinholeCamera) -> (Vec<[f64; 3]>, Vec<f64>) {
    let w2c = quat_matrix({
        let q = cam.pose.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    })
    .transpose();
    let eye = cam.pose.translation;
    struct P {
        depth: f64,
        index: usize,
        mean: Vector2<f64>,
        inv: Matrix2<f64>,
        color: [f64; 3],
        opacity: f64,
    }
    let mut ps = Vec::new();
    for (index, g) in set.splats.iter().enumerate() {
        let pc = w2c * (g.mean - eye);
        if pc.z < 0.01 {
            continue;
        }
        let j = Matrix2x3::new(
            cam.fx / pc.z,
            0.0,
            -cam.fx * pc.x / (pc.z * pc.z),
            0.0,
            cam.fy / pc.z,
            -cam.fy * pc.y / (pc.z * pc.z),
        );
        let c2 = j * w2c * covariance(g) * w2c.transpose() * j.transpose();
        let (a, b, d) = (c2[(0, 0)] + 0.3, 0.5 * (c2[(0, 1)] + c2[(1, 0)]), c2[(1, 1)] + 0.3);
        ps.push(P {
            depth: pc.z,
            index,
            mean: Vector2::new(cam.fx * pc.x / pc.z + cam.cx, cam.fy * pc.y / pc.z + cam.cy),
            inv: Matrix2::new(d, -b, -b, a) / (a * d - b * b),
            color: sh_color(g, &(g.mean - eye).normalize()),
            opacity: 1.0 / (1.0 + (-g.opacity_logit).exp()),
        });
    }
    ps.sort_by(|p, q| p.depth.total_cmp(&q.depth).then(p.index.cmp(&q.index)));
    let mut rgb = vec![[0.0; 3]; cam.width * cam.height];
    let mut alpha = vec![0.0; cam.width * cam.height];
    for py in 0..cam.height {
        for px in 0..cam.width {
            let at = Vector2::new(px as f64 + 0.5, py as f64 + 0.5);
            let (mut c, mut t) = ([0.0; 3], 1.0);
            for p in &ps {
                let d = at - p.mean;
                let m = d.dot(&(p.inv * d));
                if m > 9.0 {
                    continue;
                }
                let a = (p.opacity * (-0.5 * m).exp()).min(0.99);
                for k in 0..3 {
                    c[k] += p.color[k] * a * t;
                }
                t *= 1.0 - a;
                if t < 1e-4 {
                    break;
                }
            }
            rgb[py * cam.width + px] = c.map(|v| v.clamp(0.0, 1.0));
            alpha[py * cam.width + px] = 1.0 - t;
        }
    }
    (rgb, alpha)
}

/// Symmetric mean nearest-neighbour distance by exhaustive search.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let one = |x: &[Vec3], y: &[Vec3]| {
        x.iter().map(|p| y.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min).sqrt()).sum::<f64>()
            / x.len() as f64
    };
    0.5 * (one(a, b) + one(b, a))
}

/// Elbow solutions of a unit two-link planar arm, θ2 ≥ 0 first.
pub fn two_link_ik(x: f64, y: f64) -> [(f64, f64); 2] {
    let c2 = ((x * x + y * y - 2.0) / 2.0).clamp(-1.0, 1.0);
    let t2 = c2.acos();
    [t2, -t2].map(|t2| (y.atan2(x) - t2.sin().atan2(1.0 + t2.cos()), t2))
}
