use nalgebra::{Matrix3, UnitQuaternion};

use super::AlignError;
use crate::transform::{Sim3, Vec3};

/// Relative size of the second singular value of the source spread below
/// which the configuration is treated as collinear.
const COLLINEAR_RATIO: f64 = 1e-10;

/// Closed-form least-squares similarity mapping `src[i]` onto `dst[i]`
/// (Umeyama 1991): variance-normalized scale, SVD rotation with reflection
/// correction.
pub fn umeyama_sim3(src: &[Vec3], dst: &[Vec3]) -> Result<Sim3, AlignError> {
    if src.len() != dst.len() {
        return Err(AlignError::LengthMismatch { src: src.len(), dst: dst.len() });
    }
    let n = src.len();
    if n < 3 {
        return Err(AlignError::TooFewCorrespondences(n));
    }
    let inv_n = 1.0 / n as f64;
    let mu_s = src.iter().fold(Vec3::zeros(), |a, p| a + p) * inv_n;
    let mu_d = dst.iter().fold(Vec3::zeros(), |a, p| a + p) * inv_n;

    let mut cov = Matrix3::zeros();
    let mut src_spread = Matrix3::zeros();
    let mut var_s = 0.0;
    for (p, q) in src.iter().zip(dst) {
        let ps = p - mu_s;
        let qd = q - mu_d;
        cov += qd * ps.transpose();
        src_spread += ps * ps.transpose();
        var_s += ps.norm_squared();
    }
    cov *= inv_n;
    src_spread *= inv_n;
    var_s *= inv_n;

    let spread_sv = src_spread.symmetric_eigenvalues();
    let mut sv_sorted: Vec<f64> = spread_sv.iter().copied().collect();
    sv_sorted.sort_by(|a, b| b.total_cmp(a));
    let ratio = if sv_sorted[0] > 0.0 { sv_sorted[1] / sv_sorted[0] } else { 0.0 };
    if ratio < COLLINEAR_RATIO {
        return Err(AlignError::Degenerate { condition: ratio });
    }

    let svd = cov.svd(true, true);
    let u = svd.u.ok_or(AlignError::Degenerate { condition: ratio })?;
    let v_t = svd.v_t.ok_or(AlignError::Degenerate { condition: ratio })?;
    let d = svd.singular_values;

    let mut sign = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        sign[(2, 2)] = -1.0;
    }
    let rot = u * sign * v_t;
    let trace_ds = d[0] * sign[(0, 0)] + d[1] * sign[(1, 1)] + d[2] * sign[(2, 2)];
    let scale = trace_ds / var_s;
    let rotation = UnitQuaternion::from_matrix(&rot);
    let translation = mu_d - rotation * mu_s * scale;
    Ok(Sim3::new(scale, rotation, translation)?)
}
