use nalgebra::{DMatrix, UnitQuaternion};

use super::chain::KinematicChain;
use super::KinError;
use crate::transform::{RigidPose, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct FkResult {
    /// One pose per link, base first (always identity).
    pub links: Vec<RigidPose>,
    pub ee: RigidPose,
}

pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> Result<FkResult, KinError> {
    chain.check_dof(q)?;
    let mut links = Vec::with_capacity(q.len() + 1);
    let mut t = RigidPose::identity();
    links.push(t);
    for (j, angle) in chain.joints.iter().zip(q) {
        t = t.compose(&j.origin).compose(&RigidPose::from_rotation(UnitQuaternion::from_axis_angle(&j.axis, *angle)));
        links.push(t);
    }
    let ee = t.compose(&chain.ee_offset);
    Ok(FkResult { links, ee })
}

/// 6×n geometric Jacobian in the base frame, linear rows first.
pub fn jacobian(chain: &KinematicChain, q: &[f64]) -> Result<(DMatrix<f64>, RigidPose), KinError> {
    let fk = forward_kinematics(chain, q)?;
    let p_ee = fk.ee.translation;
    let mut jac = DMatrix::zeros(6, q.len());
    for (i, joint) in chain.joints.iter().enumerate() {
        let frame = fk.links[i].compose(&joint.origin);
        let z: Vec3 = frame.rotation * joint.axis.into_inner();
        let lin = z.cross(&(p_ee - frame.translation));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    Ok((jac, fk.ee))
}
