//! Similarity and rigid transforms shared by alignment, placement and kinematics.
//!
//! Both types serialize to the on-disk transform schema
//! `{scale, quat_wxyz, t}` (rigid poses omit `scale`). Quaternions are
//! normalized when read and zero-norm quaternions are rejected.

use nalgebra::{Matrix3, Matrix4, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("scale must be finite and positive, got {0}")]
    NonPositiveScale(f64),
    #[error("quaternion has zero or non-finite norm")]
    DegenerateQuaternion,
    #[error("translation is not finite")]
    NonFiniteTranslation,
}

/// Builds a unit quaternion from `(w, x, y, z)` components, normalizing.
pub fn quat_from_wxyz(q: [f64; 4]) -> Result<UnitQuaternion<f64>, TransformError> {
    let raw = Quaternion::new(q[0], q[1], q[2], q[3]);
    let norm = raw.norm();
    if !norm.is_finite() || norm <= f64::EPSILON {
        return Err(TransformError::DegenerateQuaternion);
    }
    // already unit up to rounding: keep the exact components so that
    // serialized transforms read back bit-for-bit
    if (norm - 1.0).abs() <= 8.0 * f64::EPSILON {
        return Ok(UnitQuaternion::new_unchecked(raw));
    }
    Ok(UnitQuaternion::from_quaternion(raw))
}

pub fn quat_to_wxyz(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

/// Geodesic angle between two rotations, in radians.
pub fn rotation_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    a.rotation_to(b).angle()
}

/// Uniform-scale similarity `x ↦ s·R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Sim3Json", into = "Sim3Json")]
pub struct Sim3 {
    scale: f64,
    rotation: UnitQuaternion<f64>,
    translation: Vec3,
}

impl Sim3 {
    pub fn new(scale: f64, rotation: UnitQuaternion<f64>, translation: Vec3) -> Result<Self, TransformError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(TransformError::NonPositiveScale(scale));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(TransformError::NonFiniteTranslation);
        }
        Ok(Self { scale, rotation, translation })
    }

    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: UnitQuaternion::identity(), translation: Vec3::zeros() }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self { translation: t, ..Self::identity() }
    }

    pub fn from_scale(scale: f64) -> Result<Self, TransformError> {
        Self::new(scale, UnitQuaternion::identity(), Vec3::zeros())
    }

    pub fn from_rigid(pose: &RigidPose) -> Self {
        Self { scale: 1.0, rotation: pose.rotation, translation: pose.translation }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v * self.scale
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Sim3) -> Sim3 {
        Sim3 {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation * self.scale + self.translation,
        }
    }

    pub fn inverse(&self) -> Sim3 {
        let inv_rot = self.rotation.inverse();
        let inv_scale = 1.0 / self.scale;
        Sim3 { scale: inv_scale, rotation: inv_rot, translation: -(inv_rot * self.translation) * inv_scale }
    }

    /// The rotation and translation parts, dropping the scale.
    pub fn rigid_part(&self) -> RigidPose {
        RigidPose::new(self.rotation, self.translation)
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(self.rotation_matrix() * self.scale));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn approx_eq(&self, other: &Sim3, tol: f64) -> bool {
        (self.scale - other.scale).abs() <= tol
            && rotation_distance(&self.rotation, &other.rotation) <= tol
            && (self.translation - other.translation).amax() <= tol
    }
}

impl Default for Sim3 {
    fn default() -> Self {
        Self::identity()
    }
}

/// Rigid transform, used for camera-to-world poses, link frames and the
/// hand-eye unknown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseJson", into = "PoseJson")]
pub struct RigidPose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
}

impl RigidPose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(UnitQuaternion::identity(), t)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidPose {
        let inv = self.rotation.inverse();
        RigidPose { rotation: inv, translation: -(inv * self.translation) }
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let iso = nalgebra::Isometry3::from_parts(Translation3::from(self.translation), self.rotation);
        iso.to_homogeneous()
    }

    /// Camera-to-world pose for an OpenCV-style camera (x right, y down,
    /// z forward) at `eye` looking at `target`.
    pub fn look_at(eye: Vec3, target: Vec3, world_up: Vec3) -> RigidPose {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(&world_up);
        if right.norm() < 1e-9 {
            right = forward.cross(&Vec3::x());
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let m = Matrix3::from_columns(&[right, down, forward]);
        let rot = UnitQuaternion::from_matrix(&m);
        RigidPose::new(rot, eye)
    }

    pub fn approx_eq(&self, other: &RigidPose, tol: f64) -> bool {
        rotation_distance(&self.rotation, &other.rotation) <= tol
            && (self.translation - other.translation).amax() <= tol
    }
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Scale field that rejects non-positive values while deserializing, so
/// errors point at the `scale` member itself.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(transparent)]
pub struct PositiveScale(pub f64);

impl<'de> Deserialize<'de> for PositiveScale {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if v > 0.0 && v.is_finite() {
            Ok(PositiveScale(v))
        } else {
            Err(serde::de::Error::custom(TransformError::NonPositiveScale(v)))
        }
    }
}

/// Quaternion field that rejects zero-norm values while deserializing.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(transparent)]
pub struct QuatWxyz(pub [f64; 4]);

impl<'de> Deserialize<'de> for QuatWxyz {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let q = <[f64; 4]>::deserialize(d)?;
        quat_from_wxyz(q).map_err(serde::de::Error::custom)?;
        Ok(QuatWxyz(q))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sim3Json {
    pub scale: PositiveScale,
    pub quat_wxyz: QuatWxyz,
    pub t: [f64; 3],
}

impl TryFrom<Sim3Json> for Sim3 {
    type Error = TransformError;

    fn try_from(j: Sim3Json) -> Result<Self, Self::Error> {
        Sim3::new(j.scale.0, quat_from_wxyz(j.quat_wxyz.0)?, Vec3::from(j.t))
    }
}

impl From<Sim3> for Sim3Json {
    fn from(s: Sim3) -> Self {
        Sim3Json {
            scale: PositiveScale(s.scale),
            quat_wxyz: QuatWxyz(quat_to_wxyz(&s.rotation)),
            t: s.translation.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseJson {
    pub quat_wxyz: QuatWxyz,
    pub t: [f64; 3],
}

impl TryFrom<PoseJson> for RigidPose {
    type Error = TransformError;

    fn try_from(j: PoseJson) -> Result<Self, Self::Error> {
        let t = Vec3::from(j.t);
        if !t.iter().all(|v| v.is_finite()) {
            return Err(TransformError::NonFiniteTranslation);
        }
        Ok(RigidPose::new(quat_from_wxyz(j.quat_wxyz.0)?, t))
    }
}

impl From<RigidPose> for PoseJson {
    fn from(p: RigidPose) -> Self {
        PoseJson { quat_wxyz: QuatWxyz(quat_to_wxyz(&p.rotation)), t: p.translation.into() }
    }
}

/// Symmetric 3×3 matrix stored as its six unique entries
/// `[xx, xy, xz, yy, yz, zz]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat3 {
    pub entries: [f64; 6],
}

impl SymMat3 {
    /// Symmetrizes `m` by averaging its off-diagonal pairs.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self {
            entries: [
                m[(0, 0)],
                0.5 * (m[(0, 1)] + m[(1, 0)]),
                0.5 * (m[(0, 2)] + m[(2, 0)]),
                m[(1, 1)],
                0.5 * (m[(1, 2)] + m[(2, 1)]),
                m[(2, 2)],
            ],
        }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let [xx, xy, xz, yy, yz, zz] = self.entries;
        Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }

    pub fn eigenvalues(&self) -> Vec3 {
        self.to_matrix().symmetric_eigenvalues()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigenvalues().iter().all(|&l| l > 0.0)
    }

    pub fn max_abs_diff(&self, other: &SymMat3) -> f64 {
        self.entries.iter().zip(other.entries.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}
