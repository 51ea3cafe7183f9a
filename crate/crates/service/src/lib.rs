//! Single-session HTTP service for placing objects and previewing the
//! composed splat world.
//!
//! Reads work on an immutable published snapshot; every mutation goes
//! through one writer lock, builds a new snapshot and publishes it with the
//! revision incremented by one.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hybridsim_core::render::{render_splats, PinholeCamera};
use hybridsim_core::Sim3;
use hybridsim_pipeline::manifest::{load_manifest, save_manifest, CameraEntry, SceneManifest};
use hybridsim_pipeline::world::{load_assets, Assets, World};
use hybridsim_pipeline::PipelineError;
use serde::{Deserialize, Serialize};

pub const REVISION_HEADER: &str = "x-scene-revision";
pub const DEFAULT_DOWNSAMPLE: usize = 4;

pub struct Snapshot {
    pub revision: u64,
    pub manifest: SceneManifest,
    pub world: World,
    previews: Mutex<HashMap<(String, usize), Bytes>>,
}

struct Inner {
    assets: Assets,
    manifest_path: PathBuf,
    published: RwLock<Arc<Snapshot>>,
    writer: tokio::sync::Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn load(manifest_path: &Path) -> Result<AppState, PipelineError> {
        let manifest = load_manifest(manifest_path)?;
        AppState::new(manifest, manifest_path.to_path_buf())
    }

    pub fn new(manifest: SceneManifest, manifest_path: PathBuf) -> Result<AppState, PipelineError> {
        let assets = load_assets(&manifest)?;
        let world = assets.compose(&assets.placements());
        let snap = Snapshot { revision: 0, manifest, world, previews: Mutex::default() };
        Ok(AppState(Arc::new(Inner {
            assets,
            manifest_path,
            published: RwLock::new(Arc::new(snap)),
            writer: tokio::sync::Mutex::new(()),
        })))
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.0.published.read().expect("snapshot lock").clone()
    }

    pub fn assets(&self) -> &Assets {
        &self.0.assets
    }

    fn publish(&self, snap: Snapshot) {
        *self.0.published.write().expect("snapshot lock") = Arc::new(snap);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ObjectSummary {
    pub name: String,
    pub placement: Sim3,
    pub align_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SceneSummary {
    pub revision: u64,
    pub objects: Vec<ObjectSummary>,
    pub cameras: Vec<CameraEntry>,
    /// The current manifest in its on-disk schema.
    pub manifest: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RevisionReply {
    pub revision: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SaveRequest {
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SaveReply {
    pub path: PathBuf,
    pub revision: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PreviewQuery {
    #[serde(default)]
    pub camera: Option<String>,
    #[serde(default)]
    pub down: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PreviewRequest {
    pub camera: PinholeCamera,
    #[serde(default)]
    pub down: Option<usize>,
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn not_found(what: String) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, what)
}

fn invalid(what: String) -> ApiError {
    ApiError(StatusCode::UNPROCESSABLE_ENTITY, what)
}

fn revision_header(rev: u64) -> [(header::HeaderName, HeaderValue); 1] {
    [(header::HeaderName::from_static(REVISION_HEADER), HeaderValue::from(rev))]
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/scene", get(scene))
        .route("/api/objects/{name}/placement", post(update_placement))
        .route("/api/preview", get(preview).post(preview_explicit))
        .route("/api/save", post(save))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

async fn health(State(st): State<AppState>) -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok", "revision": st.snapshot().revision }))
}

pub fn summarize(snap: &Snapshot) -> SceneSummary {
    SceneSummary {
        revision: snap.revision,
        objects: snap
            .manifest
            .objects
            .iter()
            .map(|o| ObjectSummary { name: o.name.clone(), placement: o.placement, align_residual: o.align_residual })
            .collect(),
        cameras: snap.manifest.cameras.clone(),
        manifest: serde_json::to_value(&snap.manifest).expect("manifest serializes"),
    }
}

async fn scene(State(st): State<AppState>) -> impl IntoResponse {
    let snap = st.snapshot();
    (revision_header(snap.revision), Json(summarize(&snap)))
}

/// `If-Match` carries the revision the client last saw, optionally quoted.
fn expected_revision(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    let Some(v) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let s = v.to_str().unwrap_or("").trim().trim_start_matches("W/").trim_matches('"');
    if s == "*" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| ApiError(StatusCode::BAD_REQUEST, format!("If-Match must be a revision number, got {s:?}")))
}

async fn update_placement(
    State(st): State<AppState>,
    UrlPath(name): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let expected = expected_revision(&headers)?;
    let place: Sim3 = serde_json::from_slice(&body).map_err(|e| invalid(format!("placement: {e}")))?;

    let _guard = st.0.writer.lock().await;
    let cur = st.snapshot();
    let idx = cur.manifest.object_index(&name).ok_or_else(|| not_found(format!("unknown object {name:?}")))?;
    if let Some(rev) = expected {
        if rev != cur.revision {
            return Err(ApiError(
                StatusCode::CONFLICT,
                format!("revision is {}, request expected {rev}", cur.revision),
            ));
        }
    }
    let mut manifest = cur.manifest.clone();
    manifest.objects[idx].placement = place;
    let placements: Vec<Sim3> = manifest.objects.iter().map(|o| o.placement).collect();
    let assets = st.clone();
    let world = tokio::task::spawn_blocking(move || assets.assets().compose(&placements))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let revision = cur.revision + 1;
    st.publish(Snapshot { revision, manifest, world, previews: Mutex::default() });
    Ok((revision_header(revision), Json(RevisionReply { revision })))
}

fn render_png(snap: &Snapshot, cam: &PinholeCamera, down: usize) -> Result<Bytes, ApiError> {
    let cam = cam.downsampled(down).map_err(|e| invalid(e.to_string()))?;
    let (img, _) = render_splats(&snap.world.splats, &cam);
    img.to_png().map(Bytes::from).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

fn png_response(rev: u64, png: Bytes) -> Response {
    (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("image/png")),
            (header::HeaderName::from_static(REVISION_HEADER), HeaderValue::from(rev)),
        ],
        png,
    )
        .into_response()
}

async fn preview(State(st): State<AppState>, Query(q): Query<PreviewQuery>) -> Result<Response, ApiError> {
    let snap = st.snapshot();
    let name = q.camera.unwrap_or_else(|| "head".into());
    let down = q.down.unwrap_or(DEFAULT_DOWNSAMPLE);
    let cam = snap.manifest.camera(&name).ok_or_else(|| not_found(format!("unknown camera {name:?}")))?;
    let key = (name, down);
    if let Some(png) = snap.previews.lock().expect("preview cache").get(&key) {
        return Ok(png_response(snap.revision, png.clone()));
    }
    let s = snap.clone();
    let png = tokio::task::spawn_blocking(move || render_png(&s, &cam, down))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    snap.previews.lock().expect("preview cache").insert(key, png.clone());
    Ok(png_response(snap.revision, png))
}

async fn preview_explicit(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: PreviewRequest = serde_json::from_slice(&body).map_err(|e| invalid(format!("preview: {e}")))?;
    req.camera.validate().map_err(|e| invalid(e.to_string()))?;
    let snap = st.snapshot();
    let s = snap.clone();
    let down = req.down.unwrap_or(DEFAULT_DOWNSAMPLE);
    let png = tokio::task::spawn_blocking(move || render_png(&s, &req.camera, down))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(png_response(snap.revision, png))
}

async fn save(State(st): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: SaveRequest = if body.is_empty() {
        SaveRequest { path: None }
    } else {
        serde_json::from_slice(&body).map_err(|e| invalid(format!("save: {e}")))?
    };
    let path = req.path.unwrap_or_else(|| st.0.manifest_path.clone());
    // saving takes the writer lock so it observes a whole revision
    let _guard = st.0.writer.lock().await;
    let snap = st.snapshot();
    save_manifest(&snap.manifest, &path).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok((revision_header(snap.revision), Json(SaveReply { path, revision: snap.revision })))
}
