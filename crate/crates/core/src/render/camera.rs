use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::transform::{RigidPose, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CameraError {
    #[error("focal lengths must be positive (fx={fx}, fy={fy})")]
    Focal { fx: f64, fy: f64 },
    #[error("image size must be at least 1x1")]
    EmptyImage,
    #[error("downsample factor must be at least 1")]
    Downsample,
}

/// OpenCV-convention pinhole camera: +z forward, +x right, +y down. `pose`
/// maps camera coordinates to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub pose: RigidPose,
}

impl PinholeCamera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        pose: RigidPose,
    ) -> Result<PinholeCamera, CameraError> {
        let cam = PinholeCamera { fx, fy, cx, cy, width, height, pose };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(CameraError::Focal { fx: self.fx, fy: self.fy });
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::EmptyImage);
        }
        Ok(())
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.pose.rotation.inverse_transform_vector(&(p - self.pose.translation))
    }

    /// Pixel coordinates of a camera-frame point (no near-plane check).
    pub fn project_camera_point(&self, pc: &Vec3) -> Vector2<f64> {
        Vector2::new(self.fx * pc.x / pc.z + self.cx, self.fy * pc.y / pc.z + self.cy)
    }

    /// Pixel coordinates and depth of a world point, `None` behind the
    /// camera.
    pub fn project(&self, p: &Vec3) -> Option<(Vector2<f64>, f64)> {
        let pc = self.world_to_camera(p);
        (pc.z > 0.0).then(|| (self.project_camera_point(&pc), pc.z))
    }

    /// Same view at `1/factor` resolution.
    pub fn downsampled(&self, factor: usize) -> Result<PinholeCamera, CameraError> {
        if factor == 0 {
            return Err(CameraError::Downsample);
        }
        let f = factor as f64;
        Ok(PinholeCamera {
            fx: self.fx / f,
            fy: self.fy / f,
            cx: self.cx / f,
            cy: self.cy / f,
            width: (self.width / factor).max(1),
            height: (self.height / factor).max(1),
            pose: self.pose,
        })
    }
}
