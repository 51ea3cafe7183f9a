//! Hand-eye calibration `AX = XB` with the Tsai–Lenz two-stage solver.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::AlignError;
use crate::transform::{rotation_distance, RigidPose, Vec3};

/// Below this ratio of smallest to largest singular value the rotation
/// system is treated as rank deficient (parallel motion axes).
const RANK_TOLERANCE: f64 = 1e-6;

/// One relative motion pair: `A_i` from the robot, `B_i` from the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPair {
    pub gripper_motion: RigidPose,
    pub camera_motion: RigidPose,
}

/// An absolute calibration station as logged: the gripper pose in the base
/// frame and the calibration target observed in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub gripper_pose: RigidPose,
    pub target_in_camera: RigidPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HandEyeMode {
    /// Camera rigidly mounted on the gripper; solves gripper ← camera.
    EyeInHand,
    /// Static camera observing a target carried by the gripper; solves
    /// base ← camera.
    #[default]
    EyeToHand,
}

/// Forms relative motions from consecutive stations.
pub fn motion_pairs(stations: &[Station], mode: HandEyeMode) -> Vec<MotionPair> {
    stations
        .windows(2)
        .map(|w| {
            let (i, j) = (&w[0], &w[1]);
            let gripper_motion = match mode {
                HandEyeMode::EyeInHand => j.gripper_pose.inverse().compose(&i.gripper_pose),
                HandEyeMode::EyeToHand => j.gripper_pose.compose(&i.gripper_pose.inverse()),
            };
            let camera_motion = j.target_in_camera.compose(&i.target_in_camera.inverse());
            MotionPair { gripper_motion, camera_motion }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandEyeSolution {
    pub transform: RigidPose,
    /// RMS rotation disagreement of `A_i X` versus `X B_i`, radians.
    pub rotation_residual: f64,
    /// RMS translation disagreement of `A_i X` versus `X B_i`, meters.
    pub translation_residual: f64,
    /// Smallest over largest singular value of the rotation system.
    pub rank_condition: f64,
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Modified Rodrigues vector `2·sin(θ/2)·n`.
fn rodrigues_half(q: &UnitQuaternion<f64>) -> Vec3 {
    // q = (cos θ/2, sin θ/2 · n); pick the hemisphere with w ≥ 0
    let v = q.imag();
    if q.w < 0.0 {
        -2.0 * v
    } else {
        2.0 * v
    }
}

/// Tsai–Lenz rotation stage for `A Y = Y B'` with `B' = pre·B·preᵀ`.
/// With `align`, each camera vector takes the sign of its gripper partner,
/// which is only valid once `Y` is known to be a small rotation. Without
/// it, rows are weighted by `|cos(θ/2)|` so motions near 180°, whose sign
/// is ambiguous under noise, barely count.
fn rotation_stage(
    pairs: &[MotionPair],
    pre: &UnitQuaternion<f64>,
    align: bool,
) -> Result<(UnitQuaternion<f64>, f64), AlignError> {
    let n = pairs.len();
    let mut m = DMatrix::zeros(3 * n, 3);
    let mut rhs = DVector::zeros(3 * n);
    for (k, p) in pairs.iter().enumerate() {
        let pa = rodrigues_half(&p.gripper_motion.rotation);
        let mut pb = rodrigues_half(&(pre * p.camera_motion.rotation * pre.inverse()));
        let mut weight = 1.0;
        if align {
            if pa.dot(&pb) < 0.0 {
                pb = -pb;
            }
        } else {
            weight = p.gripper_motion.rotation.w.abs();
        }
        m.fixed_view_mut::<3, 3>(3 * k, 0).copy_from(&(weight * skew(&(pa + pb))));
        rhs.fixed_rows_mut::<3>(3 * k).copy_from(&(weight * (pb - pa)));
    }
    let svd = m.svd(true, true);
    let sv = &svd.singular_values;
    let condition = if sv.max() > 0.0 { sv.min() / sv.max() } else { 0.0 };
    if condition < RANK_TOLERANCE {
        return Err(AlignError::DegenerateMotions { condition });
    }
    let k = svd.solve(&rhs, 0.0).map_err(|_| AlignError::DegenerateMotions { condition })?;
    let k = Vec3::new(k[0], k[1], k[2]);
    // k = tan(φ/2)·u
    let rotation = match nalgebra::Unit::try_new(k, 1e-300) {
        Some(axis) => UnitQuaternion::from_axis_angle(&axis, 2.0 * k.norm().atan()),
        None => UnitQuaternion::identity(),
    };
    Ok((rotation, condition))
}

/// Re-centring passes after the first rotation estimate.
const REFINE_PASSES: usize = 3;

/// Solves `A_i X = X B_i`. The rotation stage is re-centred on its own
/// estimate: the half-angle parametrization is singular for rotations
/// near 180°, and motions near 180° flip sign under noise, so the final
/// passes solve for a small correction with matched signs.
pub fn hand_eye_tsai_lenz(pairs: &[MotionPair]) -> Result<HandEyeSolution, AlignError> {
    if pairs.len() < 2 {
        return Err(AlignError::InsufficientMotions(pairs.len()));
    }
    let n = pairs.len();
    // quarter-turn pre-rotations keep the first pass away from the
    // half-angle singularity; the best-conditioned system wins
    let mut first: Option<(UnitQuaternion<f64>, f64)> = None;
    let mut last_err = None;
    for pre in [
        UnitQuaternion::identity(),
        UnitQuaternion::from_axis_angle(&Vec3::x_axis(), FRAC_PI_2),
        UnitQuaternion::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2),
        UnitQuaternion::from_axis_angle(&Vec3::z_axis(), FRAC_PI_2),
    ] {
        match rotation_stage(pairs, &pre, false) {
            Ok((y, c)) if first.is_none_or(|(_, best)| c > best) => first = Some((y * pre, c)),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let (mut rotation, condition) = match (first, last_err) {
        (Some(f), _) => f,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one candidate ran"),
    };
    for _ in 0..REFINE_PASSES {
        let (step, _) = rotation_stage(pairs, &rotation, true)?;
        rotation = step * rotation;
        if step.angle() < 1e-15 {
            break;
        }
    }
    let r_x = rotation.to_rotation_matrix().into_inner();

    let mut c = DMatrix::zeros(3 * n, 3);
    let mut d = DVector::zeros(3 * n);
    for (k, p) in pairs.iter().enumerate() {
        let r_a = p.gripper_motion.rotation_matrix();
        c.fixed_view_mut::<3, 3>(3 * k, 0).copy_from(&(r_a - Matrix3::identity()));
        let row = r_x * p.camera_motion.translation - p.gripper_motion.translation;
        d.fixed_rows_mut::<3>(3 * k).copy_from(&row);
    }
    let t = c.svd(true, true).solve(&d, 0.0).map_err(|_| AlignError::DegenerateMotions { condition })?;
    let transform = RigidPose::new(rotation, Vec3::new(t[0], t[1], t[2]));

    let (mut rot_sq, mut trans_sq) = (0.0, 0.0);
    for p in pairs {
        let lhs = p.gripper_motion.compose(&transform);
        let rhs = transform.compose(&p.camera_motion);
        rot_sq += rotation_distance(&lhs.rotation, &rhs.rotation).powi(2);
        trans_sq += (lhs.translation - rhs.translation).norm_squared();
    }
    Ok(HandEyeSolution {
        transform,
        rotation_residual: (rot_sq / n as f64).sqrt(),
        translation_residual: (trans_sq / n as f64).sqrt(),
        rank_condition: condition,
    })
}
