//! Real spherical-harmonics color evaluation (degree ≤ 3), using the basis
//! normalization and sign conventions of common splat exporters.

use crate::splat::ShCoefficients;
use crate::transform::Vec3;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Basis values for every coefficient slot up to `degree`.
pub fn sh_basis(degree: u8, dir: &Vec3) -> Vec<f64> {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let mut b = vec![SH_C0];
    if degree >= 1 {
        b.extend([-SH_C1 * y, SH_C1 * z, -SH_C1 * x]);
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b.extend([
            SH_C2[0] * x * y,
            SH_C2[1] * y * z,
            SH_C2[2] * (2.0 * zz - xx - yy),
            SH_C2[3] * x * z,
            SH_C2[4] * (xx - yy),
        ]);
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b.extend([
            SH_C3[0] * y * (3.0 * xx - yy),
            SH_C3[1] * x * y * z,
            SH_C3[2] * y * (4.0 * zz - xx - yy),
            SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
            SH_C3[4] * x * (4.0 * zz - xx - yy),
            SH_C3[5] * z * (xx - yy),
            SH_C3[6] * x * (xx - 3.0 * yy),
        ]);
    }
    b
}

/// `0.5 + Σ c·Y(dir)` per channel; not clamped.
pub fn eval_sh(sh: &ShCoefficients, dir: &Vec3) -> [f64; 3] {
    let basis = sh_basis(sh.degree(), dir);
    let mut rgb = [0.5; 3];
    for (c, y) in sh.coefficients().iter().zip(&basis) {
        for k in 0..3 {
            rgb[k] += c[k] * y;
        }
    }
    rgb
}
