//! Serial revolute chains loaded from a URDF subset plus a JSON sidecar of
//! per-link collision spheres.

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::{Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::KinError;
use crate::mesh::TriMesh;
use crate::transform::{RigidPose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VisualShape {
    Box { size: Vec3 },
    Cylinder { radius: f64, length: f64 },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Visual {
    /// Shape frame relative to the owning link frame.
    pub origin: RigidPose,
    pub shape: VisualShape,
    pub color: Option<[f64; 3]>,
}

impl Visual {
    /// Tessellated shape in the link frame.
    pub fn to_mesh(&self, label: &str) -> TriMesh {
        let local = match self.shape {
            VisualShape::Box { size } => TriMesh::cuboid(size, label),
            VisualShape::Cylinder { radius, length } => TriMesh::cylinder(radius, length, 16, label),
            VisualShape::Sphere { radius } => TriMesh::uv_sphere(radius, 8, 12, label),
        };
        local.transformed_rigid(&self.origin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevoluteJoint {
    pub name: String,
    /// Fixed transform from the parent link frame to the joint frame.
    pub origin: RigidPose,
    pub axis: Unit<Vec3>,
    pub lower: f64,
    pub upper: f64,
}

/// A serial chain with `n` revolute joints and `n + 1` links. Link 0 is the
/// base; link `i + 1` is driven by joint `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    pub name: String,
    pub link_names: Vec<String>,
    pub joints: Vec<RevoluteJoint>,
    pub spheres: Vec<Vec<Sphere>>,
    pub visuals: Vec<Vec<Visual>>,
    /// Tool frame relative to the last link.
    pub ee_offset: RigidPose,
    /// Upper bound on the distance from each joint axis to any collision
    /// sphere center it can move.
    reach: Vec<f64>,
}

impl KinematicChain {
    pub fn new(
        name: impl Into<String>,
        link_names: Vec<String>,
        joints: Vec<RevoluteJoint>,
        spheres: Vec<Vec<Sphere>>,
        visuals: Vec<Vec<Visual>>,
        ee_offset: RigidPose,
    ) -> Result<KinematicChain, KinError> {
        let n = joints.len();
        if link_names.len() != n + 1 || spheres.len() != n + 1 || visuals.len() != n + 1 {
            return Err(KinError::Structure(format!("{n} joints need {} links, spheres and visual lists", n + 1)));
        }
        for j in &joints {
            if !(j.lower < j.upper) || !j.lower.is_finite() || !j.upper.is_finite() {
                return Err(KinError::MissingLimits(j.name.clone()));
            }
        }
        for s in spheres.iter().flatten() {
            if !(s.radius >= 0.0) || !s.center.iter().all(|v| v.is_finite()) {
                return Err(KinError::Structure("invalid collision sphere".into()));
            }
        }
        let reach = (0..n)
            .map(|j| {
                let mut best: f64 = 0.0;
                let mut lever = 0.0;
                for k in (j + 1)..=n {
                    for s in &spheres[k] {
                        best = best.max(lever + s.center.norm());
                    }
                    if k < n {
                        lever += joints[k].origin.translation.norm();
                    }
                }
                best
            })
            .collect();
        Ok(KinematicChain { name: name.into(), link_names, joints, spheres, visuals, ee_offset, reach })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.lower).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.upper).collect()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof() && q.iter().zip(&self.joints).all(|(v, j)| *v >= j.lower && *v <= j.upper)
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, j) in q.iter_mut().zip(&self.joints) {
            *v = v.clamp(j.lower, j.upper);
        }
    }

    pub(crate) fn reach(&self) -> &[f64] {
        &self.reach
    }

    pub fn check_dof(&self, q: &[f64]) -> Result<(), KinError> {
        if q.len() == self.dof() {
            Ok(())
        } else {
            Err(KinError::Dimension { expected: self.dof(), got: q.len() })
        }
    }

    /// Sum of link offsets plus the tool offset: no end-effector position
    /// can be farther than this from the first joint.
    pub fn max_reach(&self) -> f64 {
        self.joints.iter().skip(1).map(|j| j.origin.translation.norm()).sum::<f64>() + self.ee_offset.translation.norm()
    }

    pub fn approx_eq(&self, other: &KinematicChain, tol: f64) -> bool {
        let close = |a: &Vec3, b: &Vec3| (a - b).amax() <= tol;
        self.link_names == other.link_names
            && self.joints.len() == other.joints.len()
            && self.joints.iter().zip(&other.joints).all(|(a, b)| {
                a.name == b.name
                    && a.origin.approx_eq(&b.origin, tol)
                    && close(&a.axis, &b.axis)
                    && (a.lower - b.lower).abs() <= tol
                    && (a.upper - b.upper).abs() <= tol
            })
            && self.spheres.len() == other.spheres.len()
            && self.spheres.iter().zip(&other.spheres).all(|(a, b)| {
                a.len() == b.len()
                    && a.iter().zip(b).all(|(s, t)| close(&s.center, &t.center) && (s.radius - t.radius).abs() <= tol)
            })
            && self.visuals.iter().map(Vec::len).eq(other.visuals.iter().map(Vec::len))
            && self.ee_offset.approx_eq(&other.ee_offset, tol)
    }
}

fn pose_from_urdf(p: &urdf_rs::Pose) -> RigidPose {
    let [x, y, z] = p.xyz.0;
    let [r, pi, ya] = p.rpy.0;
    // URDF rpy is fixed-axis X, then Y, then Z
    RigidPose::new(UnitQuaternion::from_euler_angles(r, pi, ya), Vec3::new(x, y, z))
}

fn pose_to_urdf(p: &RigidPose) -> urdf_rs::Pose {
    let (r, pi, ya) = p.rotation.euler_angles();
    urdf_rs::Pose {
        xyz: urdf_rs::Vec3([p.translation.x, p.translation.y, p.translation.z]),
        rpy: urdf_rs::Vec3([r, pi, ya]),
    }
}

fn visual_from_urdf(v: &urdf_rs::Visual, offset: &RigidPose) -> Option<Visual> {
    let shape = match &v.geometry {
        urdf_rs::Geometry::Box { size } => VisualShape::Box { size: Vec3::from(size.0) },
        urdf_rs::Geometry::Cylinder { radius, length } => VisualShape::Cylinder { radius: *radius, length: *length },
        urdf_rs::Geometry::Sphere { radius } => VisualShape::Sphere { radius: *radius },
        // external meshes and capsules are not rendered
        _ => return None,
    };
    let color = v.material.as_ref().and_then(|m| m.color.as_ref()).map(|c| [c.rgba.0[0], c.rgba.0[1], c.rgba.0[2]]);
    Some(Visual { origin: offset.compose(&pose_from_urdf(&v.origin)), shape, color })
}

/// Sidecar document: `{link_name: [{center: [x, y, z], radius}]}`.
pub type SphereSidecar = BTreeMap<String, Vec<Sphere>>;

/// Parses a serial revolute chain. Fixed joints are folded into the
/// preceding moving link; trailing fixed joints form the tool offset.
pub fn parse_chain(urdf: &str, sidecar: Option<&str>) -> Result<KinematicChain, KinError> {
    let robot = urdf_rs::read_from_string(urdf).map_err(|e| KinError::Urdf(e.to_string()))?;
    let mut spheres_by_link: SphereSidecar = match sidecar {
        Some(text) => serde_json::from_str(text).map_err(|e| KinError::Sidecar(e.to_string()))?,
        None => SphereSidecar::new(),
    };

    let children: HashSet<&str> = robot.joints.iter().map(|j| j.child.link.as_str()).collect();
    let mut by_parent: HashMap<&str, Vec<&urdf_rs::Joint>> = HashMap::new();
    for j in &robot.joints {
        by_parent.entry(j.parent.link.as_str()).or_default().push(j);
    }
    for (link, js) in &by_parent {
        if js.len() > 1 {
            return Err(KinError::Branching((*link).to_string()));
        }
    }
    let roots: Vec<&str> = robot.links.iter().map(|l| l.name.as_str()).filter(|n| !children.contains(n)).collect();
    let root = match roots.as_slice() {
        [r] => *r,
        [] => return Err(KinError::Structure("no root link".into())),
        _ => return Err(KinError::Structure(format!("multiple root links: {roots:?}"))),
    };
    let links: HashMap<&str, &urdf_rs::Link> = robot.links.iter().map(|l| (l.name.as_str(), l)).collect();

    let mut link_names = vec![root.to_string()];
    let mut joints = Vec::new();
    let mut spheres: Vec<Vec<Sphere>> = vec![Vec::new()];
    let mut visuals: Vec<Vec<Visual>> = vec![Vec::new()];
    // offset of the current URDF link relative to the current moving link
    let mut acc = RigidPose::identity();
    let mut current = root;
    let mut visited = HashSet::new();
    loop {
        if !visited.insert(current) {
            return Err(KinError::Structure(format!("cycle at link {current}")));
        }
        if let Some(link) = links.get(current) {
            let slot = visuals.len() - 1;
            visuals[slot].extend(link.visual.iter().filter_map(|v| visual_from_urdf(v, &acc)));
        }
        if let Some(list) = spheres_by_link.remove(current) {
            let slot = spheres.len() - 1;
            spheres[slot]
                .extend(list.into_iter().map(|s| Sphere { center: acc.transform_point(&s.center), radius: s.radius }));
        }
        let Some(js) = by_parent.get(current) else { break };
        let j = js[0];
        let origin = acc.compose(&pose_from_urdf(&j.origin));
        match j.joint_type {
            urdf_rs::JointType::Fixed => acc = origin,
            urdf_rs::JointType::Revolute => {
                let axis = Unit::try_new(Vec3::from(j.axis.xyz.0), 1e-9)
                    .ok_or_else(|| KinError::Structure(format!("joint {} has a zero axis", j.name)))?;
                joints.push(RevoluteJoint {
                    name: j.name.clone(),
                    origin,
                    axis,
                    lower: j.limit.lower,
                    upper: j.limit.upper,
                });
                link_names.push(j.child.link.clone());
                spheres.push(Vec::new());
                visuals.push(Vec::new());
                acc = RigidPose::identity();
            }
            ref other => {
                return Err(KinError::UnsupportedJoint {
                    joint: j.name.clone(),
                    kind: format!("{other:?}").to_lowercase(),
                })
            }
        }
        current = j.child.link.as_str();
    }
    if let Some(name) = spheres_by_link.keys().next() {
        return Err(KinError::UnknownLink(name.clone()));
    }
    KinematicChain::new(robot.name, link_names, joints, spheres, visuals, acc)
}

/// Writes the chain back as URDF plus sphere sidecar JSON.
pub fn serialize_chain(chain: &KinematicChain) -> Result<(String, String), KinError> {
    let visual_to_urdf = |v: &Visual| urdf_rs::Visual {
        name: None,
        origin: pose_to_urdf(&v.origin),
        geometry: match v.shape {
            VisualShape::Box { size } => urdf_rs::Geometry::Box { size: urdf_rs::Vec3([size.x, size.y, size.z]) },
            VisualShape::Cylinder { radius, length } => urdf_rs::Geometry::Cylinder { radius, length },
            VisualShape::Sphere { radius } => urdf_rs::Geometry::Sphere { radius },
        },
        material: v.color.map(|c| urdf_rs::Material {
            name: String::new(),
            color: Some(urdf_rs::Color { rgba: urdf_rs::Vec4([c[0], c[1], c[2], 1.0]) }),
            texture: None,
        }),
    };
    let mut links: Vec<urdf_rs::Link> = chain
        .link_names
        .iter()
        .zip(&chain.visuals)
        .map(|(name, vis)| urdf_rs::Link {
            name: name.clone(),
            inertial: Default::default(),
            visual: vis.iter().map(visual_to_urdf).collect(),
            collision: Vec::new(),
        })
        .collect();
    let mut joints: Vec<urdf_rs::Joint> = chain
        .joints
        .iter()
        .enumerate()
        .map(|(i, j)| urdf_rs::Joint {
            name: j.name.clone(),
            joint_type: urdf_rs::JointType::Revolute,
            origin: pose_to_urdf(&j.origin),
            parent: urdf_rs::LinkName { link: chain.link_names[i].clone() },
            child: urdf_rs::LinkName { link: chain.link_names[i + 1].clone() },
            axis: urdf_rs::Axis { xyz: urdf_rs::Vec3([j.axis.x, j.axis.y, j.axis.z]) },
            limit: urdf_rs::JointLimit { lower: j.lower, upper: j.upper, ..Default::default() },
            calibration: None,
            dynamics: None,
            mimic: None,
            safety_controller: None,
        })
        .collect();
    if chain.ee_offset != RigidPose::identity() {
        let last = chain.link_names.last().cloned().unwrap_or_default();
        let tool = format!("{last}_tool");
        links.push(urdf_rs::Link {
            name: tool.clone(),
            inertial: Default::default(),
            visual: Vec::new(),
            collision: Vec::new(),
        });
        joints.push(urdf_rs::Joint {
            name: format!("{last}_tool_fixed"),
            joint_type: urdf_rs::JointType::Fixed,
            origin: pose_to_urdf(&chain.ee_offset),
            parent: urdf_rs::LinkName { link: last },
            child: urdf_rs::LinkName { link: tool },
            axis: Default::default(),
            limit: Default::default(),
            calibration: None,
            dynamics: None,
            mimic: None,
            safety_controller: None,
        });
    }
    let robot = urdf_rs::Robot { name: chain.name.clone(), version: None, links, joints, materials: Vec::new() };
    let urdf = urdf_rs::write_to_string(&robot).map_err(|e| KinError::Urdf(e.to_string()))?;
    let sidecar: SphereSidecar = chain
        .link_names
        .iter()
        .zip(&chain.spheres)
        .filter(|(_, s)| !s.is_empty())
        .map(|(n, s)| (n.clone(), s.clone()))
        .collect();
    let sidecar = serde_json::to_string_pretty(&sidecar).map_err(|e| KinError::Sidecar(e.to_string()))?;
    Ok((urdf, sidecar))
}
