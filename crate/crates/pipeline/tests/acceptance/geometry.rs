use std::time::{Duration, Instant};

use anyhow::ensure;
use hybridsim_core::align::{
    hand_eye_tsai_lenz, motion_pairs, scaled_icp, transform_camera_pose, umeyama_sim3, HandEyeMode, IcpParams, Station,
};
use hybridsim_core::render::{project_gaussian, PinholeCamera};
use hybridsim_core::splat::{covariance_of, density_at, transform_splat};
use hybridsim_core::{PointCloud, RigidPose, Sim3, Vec3};
use nalgebra::UnitQuaternion;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::gen::*;
use crate::{oracle, within, Outcome};

pub fn transforms() -> Outcome {
    let t0 = Instant::now();
    let cases = 10_000;
    let mut r = rng(0xa1);
    let mut worst = [0.0f64; 4];
    for _ in 0..cases {
        let degree = r.random_range(0..=3);
        let g = splat(&mut r, degree);
        let (a, b) = (sim3(&mut r, 0.2, 5.0), sim3(&mut r, 0.2, 5.0));
        let moved = transform_splat(&g, &a);

        // covariance from transformed parameters vs the congruence of the original
        let rm = oracle::quat_matrix({
            let q = a.rotation().quaternion();
            [q.w, q.i, q.j, q.k]
        });
        let congruent = a.scale().powi(2) * rm * oracle::covariance(&g) * rm.transpose();
        let rebuilt = oracle::covariance(&moved);
        let lib = covariance_of(&moved).to_matrix();
        worst[0] = worst[0].max((congruent - rebuilt).amax()).max((congruent - lib).amax());

        let x = g.mean + vec3(&mut r, 0.3);
        let d0 = density_at(&g, &x);
        let d1 = density_at(&moved, &a.transform_point(&x));
        worst[1] = worst[1].max((d0 - d1).abs()).max((d0 - oracle::density(&g, &x)).abs());

        let stepwise = transform_splat(&moved, &b);
        let direct = transform_splat(&g, &b.compose(&a));
        worst[2] = worst[2].max(oracle::param_gap(&stepwise, &direct));
        worst[3] = worst[3].max(oracle::param_gap(&transform_splat(&moved, &a.inverse()), &g));
    }
    let names = ["covariance", "density", "composition", "inverse"];
    for (n, w) in names.iter().zip(worst) {
        ensure!(w <= 1e-9, "{n} law off by {w:.3e}");
    }
    within(t0.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{cases} cases, worst {:.1e}", worst.iter().cloned().fold(0.0, f64::max)))
}

/// An asymmetric cloud: a slab, an offset post and a tilted fin.
fn lumpy_cloud(seed: u64, n: usize) -> Vec<Vec3> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| match i % 3 {
            0 => Vec3::new(r.random_range(0.0..1.0), r.random_range(0.0..0.6), r.random_range(0.0..0.05)),
            1 => Vec3::new(r.random_range(0.7..0.8), r.random_range(0.1..0.2), r.random_range(0.05..0.5)),
            _ => {
                let u: f64 = r.random_range(0.0..0.4);
                Vec3::new(0.1 + u, 0.45 + 0.5 * u, r.random_range(0.05..0.25))
            }
        })
        .collect()
}

pub fn registration() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng(0xb2);
    let mut exact = 0.0f64;
    for _ in 0..2000 {
        let s = sim3(&mut r, 0.2, 5.0);
        let src: Vec<Vec3> = (0..8).map(|_| vec3(&mut r, 1.0)).collect();
        let dst: Vec<Vec3> = src.iter().map(|p| oracle::apply(&s, p)).collect();
        let est = umeyama_sim3(&src, &dst)?;
        let rot = (est.rotation_matrix() - s.rotation_matrix()).amax();
        exact = exact.max((est.scale() - s.scale()).abs()).max(rot).max((est.translation() - s.translation()).amax());
    }
    ensure!(exact <= 1e-9, "closed-form recovery off by {exact:.3e}");

    let mut icp_worst = 0.0f64;
    for seed in 0..5 {
        let truth = sim3(&mut rng(100 + seed), 0.5, 2.0);
        let src = lumpy_cloud(seed, 2000);
        let dst: Vec<Vec3> = src.iter().map(|p| oracle::apply(&truth, p)).collect();
        // 5°, 5 % and about 4 cm away from the truth, about the source centroid
        let c = src.iter().sum::<Vec3>() / src.len() as f64;
        let axis = nalgebra::Unit::new_normalize(Vec3::new(1.0, 2.0, 0.5));
        let nudge =
            Sim3::new(1.05, UnitQuaternion::from_axis_angle(&axis, 5f64.to_radians()), Vec3::new(0.03, -0.03, 0.028))?;
        let init = truth.compose(&Sim3::from_translation(c)).compose(&nudge).compose(&Sim3::from_translation(-c));
        let res =
            scaled_icp(&PointCloud::new(src, "src")?, &PointCloud::new(dst, "dst")?, &init, &IcpParams::default())?;
        for (i, w) in res.history.windows(2).enumerate() {
            ensure!(w[1] <= w[0], "seed {seed}: residual rose at iteration {}", i + 1);
        }
        let t = &res.transform;
        icp_worst = icp_worst
            .max(t.rotation().angle_to(truth.rotation()))
            .max((t.scale() / truth.scale() - 1.0).abs())
            .max((t.translation() - truth.translation()).norm());
    }
    ensure!(icp_worst <= 1e-3, "ICP recovery off by {icp_worst:.3e}");
    within(t0.elapsed(), Duration::from_secs(30))?;
    Ok(format!("closed form {exact:.1e}, ICP {icp_worst:.1e}, residuals monotone"))
}

pub fn projection() -> Outcome {
    let mut r = rng(0xc3);
    let mut worst_px = 0.0f64;
    let mut worst_cov = 0.0f64;
    for case in 0..100 {
        let target = vec3(&mut r, 1.0);
        let eye = target + vec3(&mut r, 1.0).normalize() * r.random_range(2.0..5.0);
        let cam = PinholeCamera { fx: r.random_range(200.0..600.0), ..camera_at(eye, target, 320, 240, 300.0) };
        let s = sim3(&mut r, 0.2, 5.0);
        let moved = PinholeCamera { pose: transform_camera_pose(&cam.pose, &s), ..cam };
        let mut seen = 0;
        for _ in 0..30 {
            let mut g = splat(&mut r, 0);
            g.mean = target + vec3(&mut r, 0.8);
            let (Some(a), Some(b)) = (project_gaussian(&g, &cam), project_gaussian(&transform_splat(&g, &s), &moved))
            else {
                continue;
            };
            seen += 1;
            worst_px = worst_px.max((a.mean2d - b.mean2d).amax());
            worst_cov = worst_cov.max((a.cov2d - b.cov2d).amax() / a.cov2d.amax());
            let (pa, _) = cam.project(&g.mean).unwrap();
            let (pb, _) = moved.project(&oracle::apply(&s, &g.mean)).unwrap();
            worst_px = worst_px.max((pa - pb).amax());
        }
        ensure!(seen > 0, "case {case}: nothing in front of the camera");
    }
    ensure!(worst_px < 1e-6, "reprojection error {worst_px:.3e} px");
    ensure!(worst_cov < 1e-6, "projected covariance differs by {worst_cov:.3e} (relative)");
    Ok(format!("100 cases, worst {worst_px:.1e} px"))
}

const WORKSPACE: Vec3 = Vec3::new(0.5, 0.0, 0.4);

fn jitter(p: &RigidPose, r: &mut impl Rng, sigma: (f64, f64)) -> RigidPose {
    if sigma == (0.0, 0.0) {
        return *p;
    }
    let (nr, nt) = (Normal::new(0.0, sigma.0).unwrap(), Normal::new(0.0, sigma.1).unwrap());
    let dr = UnitQuaternion::from_scaled_axis(Vec3::from_fn(|_, _| nr.sample(r)));
    RigidPose::new(dr * p.rotation, p.translation + Vec3::from_fn(|_, _| nt.sample(r)))
}

/// Desk-scale hand-eye problem: a static camera 1 m from the workspace or
/// a wrist camera near the flange, ten gripper stations within 0.4 m.
fn hand_eye_problem(seed: u64, mode: HandEyeMode, sigma: (f64, f64)) -> (RigidPose, Vec<Station>) {
    let mut r = rng(seed);
    let x = match mode {
        HandEyeMode::EyeToHand => RigidPose::new(rotation(&mut r), WORKSPACE + vec3(&mut r, 1.0).normalize()),
        HandEyeMode::EyeInHand => pose(&mut r, Vec3::zeros(), 0.1),
    };
    let fixed = match mode {
        HandEyeMode::EyeToHand => pose(&mut r, Vec3::zeros(), 0.1),
        HandEyeMode::EyeInHand => pose(&mut r, WORKSPACE, 0.3),
    };
    let stations = (0..10)
        .map(|_| {
            let g = pose(&mut r, WORKSPACE, 0.4);
            let seen = match mode {
                HandEyeMode::EyeToHand => x.inverse().compose(&g).compose(&fixed),
                HandEyeMode::EyeInHand => g.compose(&x).inverse().compose(&fixed),
            };
            Station { gripper_pose: jitter(&g, &mut r, sigma), target_in_camera: jitter(&seen, &mut r, sigma) }
        })
        .collect();
    (x, stations)
}

pub fn calibration() -> Outcome {
    let mut exact = 0.0f64;
    let mut noisy = (0.0f64, 0.0f64);
    let sigma = (0.1f64.to_radians(), 0.5e-3);
    for mode in [HandEyeMode::EyeToHand, HandEyeMode::EyeInHand] {
        for seed in 0..20 {
            let (x, st) = hand_eye_problem(seed, mode, (0.0, 0.0));
            let sol = hand_eye_tsai_lenz(&motion_pairs(&st, mode))?.transform;
            exact = exact
                .max(
                    (sol.rotation.to_rotation_matrix().into_inner() - x.rotation.to_rotation_matrix().into_inner())
                        .amax(),
                )
                .max((sol.translation - x.translation).amax());
        }
        for trial in 0..100 {
            let (x, st) = hand_eye_problem(10_000 + trial, mode, sigma);
            let sol = hand_eye_tsai_lenz(&motion_pairs(&st, mode))?.transform;
            noisy.0 = noisy.0.max(sol.rotation.angle_to(&x.rotation).to_degrees());
            noisy.1 = noisy.1.max((sol.translation - x.translation).norm() * 1e3);
        }
    }
    ensure!(exact <= 1e-9, "noiseless recovery off by {exact:.3e}");
    ensure!(noisy.0 < 0.5 && noisy.1 < 5.0, "noisy worst case {:.3}° / {:.2} mm", noisy.0, noisy.1);
    Ok(format!("noiseless {exact:.1e}; 100 noisy trials per mounting, worst {:.3}° / {:.2} mm", noisy.0, noisy.1))
}
