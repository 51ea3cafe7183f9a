//! Seeded generators shared by the suites.

use hybridsim_core::render::PinholeCamera;
use hybridsim_core::{GaussianSplat, RigidPose, ShCoefficients, Sim3, SplatSet, Vec3};
use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let mut n = || rng.sample::<f64, _>(StandardNormal);
    UnitQuaternion::from_quaternion(Quaternion::new(n(), n(), n(), n()))
}

pub fn vec3(rng: &mut impl Rng, half: f64) -> Vec3 {
    Vec3::from_fn(|_, _| rng.random_range(-half..half))
}

/// Log-uniform scale in `[lo, hi]`, uniform rotation, translation in ±5.
pub fn sim3(rng: &mut impl Rng, lo: f64, hi: f64) -> Sim3 {
    let s = rng.random_range(lo.ln()..=hi.ln()).exp();
    Sim3::new(s, rotation(rng), vec3(rng, 5.0)).unwrap()
}

pub fn pose(rng: &mut impl Rng, center: Vec3, half: f64) -> RigidPose {
    RigidPose::new(rotation(rng), center + vec3(rng, half))
}

pub fn splat(rng: &mut impl Rng, degree: u8) -> GaussianSplat {
    let coeffs =
        (0..ShCoefficients::count_for_degree(degree)).map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0))).collect();
    let q = rotation(rng);
    GaussianSplat::new(
        vec3(rng, 3.0),
        Vec3::from_fn(|_, _| rng.random_range(-4.0..0.5)),
        [q.w, q.i, q.j, q.k],
        rng.random_range(-4.0..4.0),
        ShCoefficients::new(degree, coeffs).unwrap(),
    )
    .unwrap()
}

pub fn splat_set(rng: &mut impl Rng, n: usize, degree: u8) -> SplatSet {
    SplatSet::new((0..n).map(|_| splat(rng, degree)).collect(), "world")
}

pub fn camera_at(eye: Vec3, target: Vec3, width: usize, height: usize, f: f64) -> PinholeCamera {
    let pose = RigidPose::look_at(eye, target, Vec3::z());
    PinholeCamera::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height, pose).unwrap()
}

/// Up to ten small splats around the origin, seen from about 3 m away.
pub fn small_scene(seed: u64, n: usize, degree: u8) -> (SplatSet, PinholeCamera) {
    let mut r = rng(seed);
    let splats = (0..n)
        .map(|_| {
            let mut g = splat(&mut r, degree);
            g.mean = vec3(&mut r, 0.8);
            g.log_scales = Vec3::from_fn(|_, _| r.random_range(-3.0..-1.2));
            g
        })
        .collect();
    let cam = camera_at(Vec3::new(-3.0, 0.3, 0.4), Vec3::zeros(), 64, 64, 70.0);
    (SplatSet::new(splats, "world"), cam)
}
