use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma, Rgb, RgbImage};

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("depth map: {0}")]
    DepthFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Row-major RGB image with linear channel values.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Image {
        Image::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Image {
        Image { width, height, rgb: vec![color; width * height] }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.rgb[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: [f64; 3]) {
        self.rgb[y * self.width + x] = c;
    }

    pub fn clamped(mut self) -> Image {
        for px in &mut self.rgb {
            for c in px.iter_mut() {
                *c = c.clamp(0.0, 1.0);
            }
        }
        self
    }

    /// 8-bit PNG encoding, channels quantized by `round(v·255)`.
    pub fn to_png(&self) -> Result<Vec<u8>, ImageError> {
        let mut img = RgbImage::new(self.width as u32, self.height as u32);
        for (i, px) in self.rgb.iter().enumerate() {
            let (x, y) = ((i % self.width) as u32, (i / self.width) as u32);
            img.put_pixel(x, y, Rgb([quantize(px[0]), quantize(px[1]), quantize(px[2])]));
        }
        let mut out = Vec::new();
        img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
        Ok(out)
    }

    pub fn from_png(bytes: &[u8]) -> Result<Image, ImageError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let rgb = img.pixels().map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]).collect();
        Ok(Image { width: w, height: h, rgb })
    }

    pub fn save_png(&self, path: &Path) -> Result<(), ImageError> {
        std::fs::write(path, self.to_png()?)?;
        Ok(())
    }
}

/// Per-pixel coverage in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Mask {
    pub fn filled(width: usize, height: usize, v: f64) -> Mask {
        Mask { width, height, values: vec![v; width * height] }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn to_png(&self) -> Result<Vec<u8>, ImageError> {
        let mut img = GrayImage::new(self.width as u32, self.height as u32);
        for (i, v) in self.values.iter().enumerate() {
            img.put_pixel((i % self.width) as u32, (i / self.width) as u32, Luma([quantize(*v)]));
        }
        let mut out = Vec::new();
        img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
        Ok(out)
    }
}

const DEPTH_MAGIC: &[u8; 4] = b"DPTH";

/// Camera-space depth in meters, `+∞` where nothing was hit.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

impl DepthMap {
    pub fn empty(width: usize, height: usize) -> DepthMap {
        DepthMap { width, height, depth: vec![f64::INFINITY; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }

    /// 16-byte header (magic, width, height, reserved) then little-endian
    /// f32 samples.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.depth.len());
        out.extend_from_slice(DEPTH_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for d in &self.depth {
            out.extend_from_slice(&(*d as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<DepthMap, ImageError> {
        if bytes.len() < 16 || &bytes[..4] != DEPTH_MAGIC {
            return Err(ImageError::DepthFormat("missing DPTH header".into()));
        }
        let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let (width, height) = (word(4), word(8));
        let body = &bytes[16..];
        if body.len() != 4 * width * height {
            return Err(ImageError::DepthFormat(format!(
                "expected {} data bytes, found {}",
                4 * width * height,
                body.len()
            )));
        }
        let depth = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        Ok(DepthMap { width, height, depth })
    }
}
