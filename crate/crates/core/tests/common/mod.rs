#![allow(dead_code)]

use hybridsim_core::render::PinholeCamera;
use hybridsim_core::splat::SplatSet;
use hybridsim_core::{GaussianSplat, RigidPose, ShCoefficients, Sim3, Vec3};
use nalgebra::{Quaternion, UnitQuaternion};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on SO(3): a normalized 4-D Gaussian.
pub fn rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let q = Quaternion::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    UnitQuaternion::from_quaternion(q)
}

pub fn vec3(rng: &mut impl Rng, half: f64) -> Vec3 {
    Vec3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half))
}

pub fn sim3(rng: &mut impl Rng, scale: std::ops::Range<f64>) -> Sim3 {
    // log-uniform so small and large scales are equally represented
    let s = rng.random_range(scale.start.ln()..scale.end.ln()).exp();
    Sim3::new(s, rotation(rng), vec3(rng, 5.0)).unwrap()
}

pub fn pose(rng: &mut impl Rng) -> RigidPose {
    RigidPose::new(rotation(rng), vec3(rng, 2.0))
}

pub fn splat(rng: &mut impl Rng, degree: u8) -> GaussianSplat {
    let n = ShCoefficients::count_for_degree(degree);
    let coeffs = (0..n).map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0))).collect();
    let q = rotation(rng);
    GaussianSplat::new(
        vec3(rng, 3.0),
        Vec3::new(rng.random_range(-4.0..0.5), rng.random_range(-4.0..0.5), rng.random_range(-4.0..0.5)),
        [q.w, q.i, q.j, q.k],
        rng.random_range(-4.0..4.0),
        ShCoefficients::new(degree, coeffs).unwrap(),
    )
    .unwrap()
}

pub fn splat_set(rng: &mut impl Rng, n: usize, degree: u8) -> SplatSet {
    SplatSet::new((0..n).map(|_| splat(rng, degree)).collect(), "world")
}

/// A camera at `eye` looking at the origin.
pub fn camera_looking_at_origin(eye: Vec3, width: usize, height: usize, f: f64) -> PinholeCamera {
    let pose = RigidPose::look_at(eye, Vec3::zeros(), Vec3::z());
    PinholeCamera::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height, pose).unwrap()
}

pub fn rotation_strategy() -> impl Strategy<Value = UnitQuaternion<f64>> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("well-conditioned quaternion", |q| q.iter().map(|v| v * v).sum::<f64>() > 0.01)
        .prop_map(|[w, x, y, z]| UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)))
}

pub fn vec3_strategy(half: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-half..half).prop_map(Vec3::from)
}

pub fn sim3_strategy() -> impl Strategy<Value = Sim3> {
    ((0.2f64..5.0), rotation_strategy(), vec3_strategy(5.0)).prop_map(|(s, r, t)| Sim3::new(s, r, t).unwrap())
}

pub fn splat_strategy() -> impl Strategy<Value = GaussianSplat> {
    (any::<u64>(), 0u8..=3).prop_map(|(seed, degree)| splat(&mut rng(seed), degree))
}

/// Two unit links in the xy-plane, tool at the tip of the second.
pub const TWO_LINK_URDF: &str = r#"<robot name="planar">
  <link name="base"/><link name="upper"/><link name="lower"/><link name="tip"/>
  <joint name="j1" type="revolute"><parent link="base"/><child link="upper"/>
    <axis xyz="0 0 1"/><limit lower="-3.1" upper="3.1" effort="1" velocity="1"/></joint>
  <joint name="j2" type="revolute"><origin xyz="1 0 0"/><parent link="upper"/><child link="lower"/>
    <axis xyz="0 0 1"/><limit lower="-3.1" upper="3.1" effort="1" velocity="1"/></joint>
  <joint name="tool" type="fixed"><origin xyz="1 0 0"/><parent link="lower"/><child link="tip"/></joint>
</robot>"#;

pub const TWO_LINK_SPHERES: &str = r#"{
  "upper": [{"center": [0.25, 0, 0], "radius": 0.05}, {"center": [0.5, 0, 0], "radius": 0.05},
            {"center": [0.75, 0, 0], "radius": 0.05}],
  "lower": [{"center": [0.25, 0, 0], "radius": 0.05}, {"center": [0.5, 0, 0], "radius": 0.05},
            {"center": [0.75, 0, 0], "radius": 0.05}, {"center": [1.0, 0, 0], "radius": 0.05}]
}"#;

/// A generic six-joint arm with alternating yaw and pitch axes.
pub const SIX_DOF_URDF: &str = r#"<robot name="six">
  <link name="l0"/><link name="l1"/><link name="l2"/><link name="l3"/>
  <link name="l4"/><link name="l5"/><link name="l6"/><link name="tool"/>
  <joint name="j1" type="revolute"><origin xyz="0 0 0.1"/><parent link="l0"/><child link="l1"/>
    <axis xyz="0 0 1"/><limit lower="-2.9" upper="2.9" effort="1" velocity="1"/></joint>
  <joint name="j2" type="revolute"><origin xyz="0 0 0.1"/><parent link="l1"/><child link="l2"/>
    <axis xyz="0 1 0"/><limit lower="-1.8" upper="1.8" effort="1" velocity="1"/></joint>
  <joint name="j3" type="revolute"><origin xyz="0 0 0.35"/><parent link="l2"/><child link="l3"/>
    <axis xyz="0 1 0"/><limit lower="-2.5" upper="2.5" effort="1" velocity="1"/></joint>
  <joint name="j4" type="revolute"><origin xyz="0 0 0.3"/><parent link="l3"/><child link="l4"/>
    <axis xyz="0 0 1"/><limit lower="-2.9" upper="2.9" effort="1" velocity="1"/></joint>
  <joint name="j5" type="revolute"><origin xyz="0 0 0.1"/><parent link="l4"/><child link="l5"/>
    <axis xyz="0 1 0"/><limit lower="-2.0" upper="2.0" effort="1" velocity="1"/></joint>
  <joint name="j6" type="revolute"><origin xyz="0 0 0.08"/><parent link="l5"/><child link="l6"/>
    <axis xyz="0 0 1"/><limit lower="-2.9" upper="2.9" effort="1" velocity="1"/></joint>
  <joint name="flange" type="fixed"><origin xyz="0 0 0.06"/><parent link="l6"/><child link="tool"/></joint>
</robot>"#;
