use super::image::{Image, ImageError, Mask};

fn check(a: (usize, usize), b: (usize, usize)) -> Result<(), ImageError> {
    if a == b {
        Ok(())
    } else {
        Err(ImageError::DimensionMismatch { a, b })
    }
}

/// `M·robot + (1 − M)·background`, per pixel and channel.
pub fn composite(robot: &Image, mask: &Mask, background: &Image) -> Result<Image, ImageError> {
    check(robot.dims(), mask.dims())?;
    check(robot.dims(), background.dims())?;
    let rgb = robot
        .rgb
        .iter()
        .zip(&mask.values)
        .zip(&background.rgb)
        .map(|((r, m), b)| [0, 1, 2].map(|k| m * r[k] + (1.0 - m) * b[k]))
        .collect();
    Ok(Image { width: robot.width, height: robot.height, rgb })
}

/// Sum of absolute differences over all pixels and channels.
pub fn photometric_l1(rendered: &Image, target: &Image) -> Result<f64, ImageError> {
    check(rendered.dims(), target.dims())?;
    Ok(rendered.rgb.iter().zip(&target.rgb).map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).abs()).sum::<f64>()).sum())
}

/// `photometric_l1` divided by the number of channel samples.
pub fn photometric_l1_mean(rendered: &Image, target: &Image) -> Result<f64, ImageError> {
    let n = 3 * rendered.rgb.len();
    Ok(photometric_l1(rendered, target)? / n.max(1) as f64)
}

/// `Σ |M·rendered − M·target|`.
pub fn masked_photometric_l1(rendered: &Image, target: &Image, mask: &Mask) -> Result<f64, ImageError> {
    check(rendered.dims(), target.dims())?;
    check(rendered.dims(), mask.dims())?;
    Ok(rendered
        .rgb
        .iter()
        .zip(&target.rgb)
        .zip(&mask.values)
        .map(|((a, b), m)| (0..3).map(|k| (m * a[k] - m * b[k]).abs()).sum::<f64>())
        .sum())
}
