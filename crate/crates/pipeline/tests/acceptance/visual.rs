use std::time::{Duration, Instant};

use anyhow::ensure;
use hybridsim_core::align::transform_camera_pose;
use hybridsim_core::render::{
    composite, masked_photometric_l1, photometric_l1, render_splats, Image, Mask, PinholeCamera,
};
use hybridsim_core::splat::apply_sim3;
use hybridsim_core::{GaussianSplat, ShCoefficients, SplatSet, Vec3};
use rand::Rng;

use crate::gen::*;
use crate::{oracle, within, Outcome};

pub fn renderer() -> Outcome {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..200u64 {
        let (set, cam) = small_scene(case, 1 + (case as usize % 10), (case % 2) as u8);
        let (img, mask) = render_splats(&set, &cam);
        let (rgb, alpha) = oracle::render(&set, &cam);
        for i in 0..rgb.len() {
            for k in 0..3 {
                worst = worst.max((img.rgb[i][k] - rgb[i][k]).abs());
            }
            worst = worst.max((mask.values[i] - alpha[i]).abs());
        }
        ensure!(worst <= 1e-6, "case {case}: renderer differs from oracle by {worst:.3e}");
    }
    within(t0.elapsed(), Duration::from_secs(60))?;

    // one near-opaque splat centred on a pixel: the screen alpha is clamped
    // to 0.99, so the pixel is 0.99 times the splat colour
    let cam = camera_at(Vec3::new(0.0, 0.0, -2.0), Vec3::zeros(), 33, 33, 60.0);
    let sh = ShCoefficients::new(1, vec![[0.4, -0.2, 0.1], [0.1, 0.0, 0.2], [0.0, 0.3, -0.1], [0.2, 0.1, 0.0]])?;
    let g = GaussianSplat::new(Vec3::zeros(), Vec3::from_element(-2.0), [1.0, 0.0, 0.0, 0.0], 10.0, sh)?;
    let (img, mask) = render_splats(&SplatSet::new(vec![g.clone()], "world"), &cam);
    let expected = oracle::sh_color(&g, &(g.mean - cam.pose.translation).normalize()).map(|c| 0.99 * c);
    let center = img.get(16, 16);
    let gap = (0..3).map(|k| (center[k] - expected[k]).abs()).fold(0.0, f64::max);
    ensure!(gap <= 1e-9, "single splat centre {center:?} vs {expected:?}");
    ensure!((mask.get(16, 16) - 0.99).abs() <= 1e-12, "single splat alpha {}", mask.get(16, 16));

    let mut worst_share = 1.0f64;
    for seed in 0..20 {
        let (set, cam) = small_scene(1000 + seed, 10, 0);
        let s = sim3(&mut rng(2000 + seed), 0.3, 3.0);
        let moved = PinholeCamera { pose: transform_camera_pose(&cam.pose, &s), ..cam };
        let (a, _) = render_splats(&set, &cam);
        let (b, _) = render_splats(&apply_sim3(&set, &s), &moved);
        let close = a.rgb.iter().zip(&b.rgb).filter(|(x, y)| (0..3).all(|k| (x[k] - y[k]).abs() <= 1e-3)).count();
        worst_share = worst_share.min(close as f64 / a.rgb.len() as f64);
    }
    ensure!(worst_share >= 0.99, "equivariant render agreement {:.2}%", 100.0 * worst_share);
    Ok(format!("200 cases worst {worst:.1e}; centre pixel exact; equivariance ≥ {:.2}% of pixels", 100.0 * worst_share))
}

fn random_image(r: &mut impl Rng, w: usize, h: usize) -> Image {
    Image { width: w, height: h, rgb: (0..w * h).map(|_| [0; 3].map(|_| r.random_range(0.0..1.0))).collect() }
}

pub fn compositing() -> Outcome {
    let mut r = rng(0xd4);
    for case in 0..500 {
        let (w, h) = (r.random_range(1..24), r.random_range(1..24));
        let (robot, bg) = (random_image(&mut r, w, h), random_image(&mut r, w, h));
        ensure!(composite(&robot, &Mask::filled(w, h, 1.0), &bg)? == robot, "case {case}: mask 1 is not the robot");
        ensure!(composite(&robot, &Mask::filled(w, h, 0.0), &bg)? == bg, "case {case}: mask 0 is not the background");
        let mask = Mask { width: w, height: h, values: (0..w * h).map(|_| r.random_range(0.0..=1.0)).collect() };
        let out = composite(&robot, &mask, &bg)?;
        for i in 0..w * h {
            let m = mask.values[i];
            for k in 0..3 {
                ensure!(out.rgb[i][k] == robot.rgb[i][k] * m + bg.rgb[i][k] * (1.0 - m), "case {case}: pixel {i}");
            }
        }
    }

    // dyadic values keep every sum exact
    let a = Image { width: 2, height: 1, rgb: vec![[0.25, 0.5, 1.0], [0.0, 0.75, 0.125]] };
    let b = Image { width: 2, height: 1, rgb: vec![[0.5, 0.5, 0.0], [1.0, 0.25, 0.25]] };
    ensure!(photometric_l1(&a, &b)? == 0.25 + 0.0 + 1.0 + 1.0 + 0.5 + 0.125, "l1 sum");
    ensure!(photometric_l1(&a, &b)? == photometric_l1(&b, &a)?, "l1 symmetry");
    let m = Mask { width: 2, height: 1, values: vec![0.5, 1.0] };
    ensure!(masked_photometric_l1(&a, &b, &m)? == 0.5 * 1.25 + 1.625, "masked l1 sum");
    ensure!(masked_photometric_l1(&a, &b, &Mask::filled(2, 1, 0.0))? == 0.0, "empty mask");
    ensure!(photometric_l1(&a, &Image::new(1, 1)).is_err(), "size mismatch accepted");
    Ok("500 random cases exact; hand sums exact".into())
}
