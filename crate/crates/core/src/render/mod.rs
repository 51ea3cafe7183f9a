//! CPU rendering: splat blending, mesh rasterization and compositing.

mod camera;
mod composite;
mod image;
mod mesh_raster;
pub mod sh;
mod splat_raster;

pub use camera::{CameraError, PinholeCamera};
pub use composite::{composite, masked_photometric_l1, photometric_l1, photometric_l1_mean};
pub use image::{DepthMap, Image, ImageError, Mask};
pub use mesh_raster::{rasterize_meshes, MeshInstance};
pub use sh::eval_sh;
pub use splat_raster::{
    project_gaussian, render_splats, Splat2D, LOW_PASS, MAX_ALPHA, MIN_TRANSMITTANCE, NEAR_PLANE, SUPPORT_SQ,
};
