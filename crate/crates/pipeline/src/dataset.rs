//! On-disk dataset layout:
//!
//! ```text
//! out/index.json
//! out/episode_000000/actions.json
//! out/episode_000000/meta.json
//! out/episode_000000/frames/000000.png
//! ```

use std::path::Path;

use hybridsim_core::render::Image;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episode::{generate_episode, Action, Episode, EpisodeMeta};
use crate::task::TaskSpec;
use crate::world::Assets;
use crate::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: usize,
    pub dir: String,
    pub seed: u64,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_stage: Option<String>,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub episodes: Vec<IndexEntry>,
    pub total: usize,
    pub successes: usize,
    pub success_rate: f64,
}

impl DatasetIndex {
    pub fn new(mut episodes: Vec<IndexEntry>) -> DatasetIndex {
        episodes.sort_by_key(|e| e.id);
        let successes = episodes.iter().filter(|e| e.success).count();
        let total = episodes.len();
        DatasetIndex {
            success_rate: if total == 0 { 0.0 } else { successes as f64 / total as f64 },
            episodes,
            total,
            successes,
        }
    }
}

pub fn episode_dir_name(id: usize) -> String {
    format!("episode_{id:06}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    std::fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("dataset records serialize");
    s.push('\n');
    s.into_bytes()
}

/// Writes one episode directory, replacing any previous contents.
pub fn write_episode(ep: &Episode, dir: &Path) -> Result<(), PipelineError> {
    if ep.frames.len() != ep.actions.len() {
        return Err(PipelineError::Dataset(format!("{} frames for {} actions", ep.frames.len(), ep.actions.len())));
    }
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let frames = dir.join("frames");
    std::fs::create_dir_all(&frames).map_err(|e| PipelineError::io(&frames, e))?;
    for (i, f) in ep.frames.iter().enumerate() {
        write_file(&frames.join(format!("{i:06}.png")), &f.to_png()?)?;
    }
    write_file(&dir.join("actions.json"), &json(&ep.actions))?;
    write_file(&dir.join("meta.json"), &json(&ep.meta))
}

fn entry(id: usize, ep: &Episode) -> IndexEntry {
    IndexEntry {
        id,
        dir: episode_dir_name(id),
        seed: ep.meta.seed,
        success: ep.meta.success,
        failure_stage: ep.meta.failure_stage.clone(),
        frames: ep.frames.len(),
    }
}

fn write_index(index: &DatasetIndex, out: &Path) -> Result<(), PipelineError> {
    write_file(&out.join("index.json"), &json(index))
}

pub fn write_dataset(episodes: &[Episode], out: &Path) -> Result<DatasetIndex, PipelineError> {
    std::fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
    let mut entries = Vec::with_capacity(episodes.len());
    for (i, ep) in episodes.iter().enumerate() {
        write_episode(ep, &out.join(episode_dir_name(i)))?;
        entries.push(entry(i, ep));
    }
    let index = DatasetIndex::new(entries);
    write_index(&index, out)?;
    Ok(index)
}

/// Generates and writes `count` episodes with seeds `seed_base + i` on a
/// pool of `workers` threads. Output bytes do not depend on `workers`.
pub fn generate_dataset(
    assets: &Assets,
    task: &TaskSpec,
    camera: &str,
    count: usize,
    seed_base: u64,
    workers: usize,
    out: &Path,
) -> Result<DatasetIndex, PipelineError> {
    std::fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Dataset(e.to_string()))?;
    let entries = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let ep = generate_episode(assets, task, camera, seed_base.wrapping_add(i as u64))?;
                write_episode(&ep, &out.join(episode_dir_name(i)))?;
                Ok(entry(i, &ep))
            })
            .collect::<Result<Vec<_>, PipelineError>>()
    })?;
    let index = DatasetIndex::new(entries);
    write_index(&index, out)?;
    Ok(index)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::io(path, e))
}

/// Reads one episode back. Frames come back quantized to 8 bits.
pub fn load_episode(dir: &Path) -> Result<Episode, PipelineError> {
    let actions: Vec<Action> = read_json(&dir.join("actions.json"))?;
    let meta: EpisodeMeta = read_json(&dir.join("meta.json"))?;
    let mut frames = Vec::with_capacity(actions.len());
    for i in 0..actions.len() {
        let p = dir.join("frames").join(format!("{i:06}.png"));
        let bytes = std::fs::read(&p).map_err(|e| PipelineError::io(&p, e))?;
        frames.push(Image::from_png(&bytes)?);
    }
    Ok(Episode { frames, actions, meta })
}

pub fn load_dataset(out: &Path) -> Result<(DatasetIndex, Vec<Episode>), PipelineError> {
    let index: DatasetIndex = read_json(&out.join("index.json"))?;
    let mut episodes = Vec::with_capacity(index.episodes.len());
    for e in &index.episodes {
        let ep = load_episode(&out.join(&e.dir))?;
        if ep.len() != e.frames || ep.meta.success != e.success {
            return Err(PipelineError::Dataset(format!("{} disagrees with index.json", e.dir)));
        }
        episodes.push(ep);
    }
    Ok((index, episodes))
}
