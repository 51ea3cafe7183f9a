//! Gaussian splat assets: parameters, covariance/density evaluation,
//! similarity transforms and set merging.

mod ply;

pub use ply::{parse_splat_ply, write_splat_ply, PlyError};

use nalgebra::{Matrix3, UnitQuaternion};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::transform::{quat_from_wxyz, Sim3, SymMat3, TransformError, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplatError {
    #[error("SH degree {0} outside 0..=3")]
    BadDegree(u8),
    #[error("SH degree {degree} needs {expected} coefficient triples, got {got}")]
    CoefficientCount { degree: u8, expected: usize, got: usize },
    #[error("non-finite splat parameter: {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("frame mismatch: expected `{expected}`, found `{found}` (was an alignment step skipped?)")]
    FrameMismatch { expected: String, found: String },
    #[error("cannot sample points from an empty splat set")]
    EmptySet,
    #[error("sample count must be at least 1")]
    ZeroSamples,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Real spherical-harmonic color coefficients; `coefficients[0]` is the DC
/// term and each entry holds one RGB triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoefficients {
    degree: u8,
    coefficients: Vec<[f64; 3]>,
}

impl ShCoefficients {
    pub fn new(degree: u8, coefficients: Vec<[f64; 3]>) -> Result<Self, SplatError> {
        if degree > 3 {
            return Err(SplatError::BadDegree(degree));
        }
        let expected = Self::count_for_degree(degree);
        if coefficients.len() != expected {
            return Err(SplatError::CoefficientCount { degree, expected, got: coefficients.len() });
        }
        if coefficients.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SplatError::NonFinite("sh"));
        }
        Ok(Self { degree, coefficients })
    }

    pub fn dc_only(dc: [f64; 3]) -> Self {
        Self { degree: 0, coefficients: vec![dc] }
    }

    pub fn count_for_degree(degree: u8) -> usize {
        let d = degree as usize + 1;
        d * d
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn coefficients(&self) -> &[[f64; 3]] {
        &self.coefficients
    }

    pub fn dc(&self) -> [f64; 3] {
        self.coefficients[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSplat {
    pub mean: Vec3,
    /// Natural-log per-axis standard deviations.
    pub log_scales: Vec3,
    pub rotation: UnitQuaternion<f64>,
    pub opacity_logit: f64,
    pub sh: ShCoefficients,
}

impl GaussianSplat {
    /// Validating constructor; the quaternion is given as `(w, x, y, z)` and
    /// normalized.
    pub fn new(
        mean: Vec3,
        log_scales: Vec3,
        quat_wxyz: [f64; 4],
        opacity_logit: f64,
        sh: ShCoefficients,
    ) -> Result<Self, SplatError> {
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(SplatError::NonFinite("mean"));
        }
        if !log_scales.iter().all(|v| v.is_finite()) {
            return Err(SplatError::NonFinite("log_scales"));
        }
        if !opacity_logit.is_finite() {
            return Err(SplatError::NonFinite("opacity"));
        }
        Ok(Self { mean, log_scales, rotation: quat_from_wxyz(quat_wxyz)?, opacity_logit, sh })
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn scales(&self) -> Vec3 {
        self.log_scales.map(f64::exp)
    }

    pub fn covariance(&self) -> SymMat3 {
        covariance_of(self)
    }

    pub fn density_at(&self, x: &Vec3) -> f64 {
        density_at(self, x)
    }
}

/// `Σ = R·diag(exp(ℓ)²)·Rᵀ`.
pub fn covariance_of(g: &GaussianSplat) -> SymMat3 {
    let r = g.rotation.to_rotation_matrix().into_inner();
    let var = Matrix3::from_diagonal(&g.log_scales.map(|l| (2.0 * l).exp()));
    SymMat3::from_matrix(&(r * var * r.transpose()))
}

/// Unnormalized Gaussian density `exp(−½ (x−μ)ᵀ Σ⁻¹ (x−μ))`, evaluated in
/// the splat's principal frame so no matrix inverse is formed.
pub fn density_at(g: &GaussianSplat, x: &Vec3) -> f64 {
    let local = g.rotation.inverse() * (x - g.mean);
    let mahalanobis_sq: f64 = (0..3)
        .map(|i| {
            let z = local[i] * (-g.log_scales[i]).exp();
            z * z
        })
        .sum();
    (-0.5 * mahalanobis_sq).exp()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplatSet {
    pub splats: Vec<GaussianSplat>,
    pub frame_label: String,
}

impl SplatSet {
    pub fn new(splats: Vec<GaussianSplat>, frame_label: impl Into<String>) -> Self {
        Self { splats, frame_label: frame_label.into() }
    }

    pub fn empty(frame_label: impl Into<String>) -> Self {
        Self::new(Vec::new(), frame_label)
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn with_frame(mut self, frame_label: impl Into<String>) -> Self {
        self.frame_label = frame_label.into();
        self
    }

    pub fn means(&self) -> Vec<Vec3> {
        self.splats.iter().map(|g| g.mean).collect()
    }
}

/// Transforms one splat: `μ̃ = sRμ + t`, `R̃ = R_S·R`, `ℓ̃ = ℓ + ln(s)`.
/// Opacity and SH coefficients are copied unchanged.
pub fn transform_splat(g: &GaussianSplat, s: &Sim3) -> GaussianSplat {
    let log_s = s.scale().ln();
    GaussianSplat {
        mean: s.transform_point(&g.mean),
        log_scales: g.log_scales.add_scalar(log_s),
        rotation: s.rotation() * g.rotation,
        opacity_logit: g.opacity_logit,
        sh: g.sh.clone(),
    }
}

/// Applies a similarity to every splat, returning a new set in the same
/// frame label. Relabel with [`SplatSet::with_frame`] when the transform
/// moves the set into another frame.
pub fn apply_sim3(set: &SplatSet, s: &Sim3) -> SplatSet {
    SplatSet {
        splats: set.splats.iter().map(|g| transform_splat(g, s)).collect(),
        frame_label: set.frame_label.clone(),
    }
}

/// Concatenates sets in order. All non-empty sets must share one frame
/// label; empty sets are neutral.
pub fn merge(sets: &[SplatSet]) -> Result<SplatSet, SplatError> {
    let frame = sets.iter().find(|s| !s.is_empty()).or(sets.first()).map(|s| s.frame_label.clone()).unwrap_or_default();
    let mut splats = Vec::with_capacity(sets.iter().map(SplatSet::len).sum());
    for set in sets {
        if !set.is_empty() && set.frame_label != frame {
            return Err(SplatError::FrameMismatch { expected: frame, found: set.frame_label.clone() });
        }
        splats.extend(set.splats.iter().cloned());
    }
    Ok(SplatSet { splats, frame_label: frame })
}

/// Draws `n` splat means with probability proportional to activated
/// opacity. Deterministic for a fixed seed.
pub fn sample_points(set: &SplatSet, n: usize, seed: u64) -> Result<PointCloud, SplatError> {
    if set.is_empty() {
        return Err(SplatError::EmptySet);
    }
    if n == 0 {
        return Err(SplatError::ZeroSamples);
    }
    let weights: Vec<f64> = set.splats.iter().map(GaussianSplat::opacity).collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| SplatError::NonFinite("opacity"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| set.splats[dist.sample(&mut rng)].mean).collect();
    Ok(PointCloud { points, label: format!("{}:splat_means", set.frame_label) })
}
