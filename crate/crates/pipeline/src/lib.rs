//! Scene manifests, world composition, episode generation and dataset
//! writing on top of `hybridsim-core`.

use std::path::Path;

pub mod dataset;
pub mod episode;
pub mod fixture;
pub mod manifest;
pub mod task;
pub mod world;

pub use dataset::{generate_dataset, load_dataset, write_dataset, write_episode, DatasetIndex, IndexEntry};
pub use episode::{
    generate_episode, plan_episode, render_episode, render_frame, replay_check, Action, Episode, EpisodeMeta,
    PlannedEpisode, ReplayReport, Segment,
};
pub use manifest::{load_manifest, save_manifest, ManifestError, SceneManifest};
pub use task::{Jitter, TaskKind, TaskSpec};
pub use world::{compose_world, load_assets, Assets, World};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("task: {0}")]
    Task(String),
    #[error("asset: {0}")]
    Asset(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Kinematics(#[from] hybridsim_core::kinematics::KinError),
    #[error(transparent)]
    Image(#[from] hybridsim_core::render::ImageError),
    #[error("dataset: {0}")]
    Dataset(String),
}

impl PipelineError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> PipelineError {
        PipelineError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}
